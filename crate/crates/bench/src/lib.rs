//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use adarhd::{BilevelProblem, LossKind, Manifold, Point, ProblemSpec, Spd, Stiefel, Tangent};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Geometries benchmarked by `manifold_ops`, with a display label.
pub fn geometries() -> Vec<(String, Arc<dyn Manifold>)> {
    vec![
        ("spd5".into(), Arc::new(Spd::new(5))),
        ("spd20".into(), Arc::new(Spd::new(20))),
        ("spd50".into(), Arc::new(Spd::new(50))),
        ("stiefel50x10".into(), Arc::new(Stiefel::new(50, 10))),
    ]
}

/// A random point with two random tangent vectors there.
pub fn sample(m: &dyn Manifold, seed: u64) -> (Point, Tangent, Tangent) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = m.sample_point(&mut rng);
    let u = m.sample_tangent(&x, &mut rng);
    let v = m.sample_tangent(&x, &mut rng);
    (x, u, v)
}

/// Mid-size instances for the solver benches.
pub fn problems() -> Vec<(String, Arc<dyn BilevelProblem>)> {
    let specs = [
        ProblemSpec::ToyQuadratic { nx: 20, ny: 30, seed: 0 },
        ProblemSpec::SimpleSimilarity {
            n: 100,
            d: 20,
            r: 5,
            lambda: 0.01,
            seed: 0,
        },
        ProblemSpec::ShallowHyperrep {
            n: 100,
            d: 20,
            r: 5,
            lambda: 0.1,
            noise_sd: 0.1,
            seed: 0,
        },
        ProblemSpec::Robust {
            loss: LossKind::KarcherMean,
            n: 10,
            d: 10,
            seed: 0,
        },
        ProblemSpec::Robust {
            loss: LossKind::GaussianMle,
            n: 50,
            d: 10,
            seed: 0,
        },
    ];
    specs
        .into_iter()
        .map(|s| (s.kind().to_string() + &loss_suffix(&s), s.build().expect("bench instance")))
        .collect()
}

fn loss_suffix(s: &ProblemSpec) -> String {
    match s {
        ProblemSpec::Robust { loss, .. } => format!("_{loss:?}").to_lowercase(),
        _ => String::new(),
    }
}
