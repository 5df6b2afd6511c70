//! The `check` subcommand: manifold property suites and FD checks of every
//! benchmark's oracles on small instances.

use std::sync::Arc;

use adarhd::diagnostics::{check_manifold, check_problem, CheckReport, FdOptions};
use adarhd::{Euclidean, LossKind, Manifold, ProblemSpec, Simplex, Spd, Stiefel};
use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Geometries of the property suite.
pub fn suite_manifolds() -> Vec<Arc<dyn Manifold>> {
    vec![
        Arc::new(Euclidean::vector(50)),
        Arc::new(Spd::new(5)),
        Arc::new(Spd::new(20)),
        Arc::new(Stiefel::new(50, 10)),
        Arc::new(Simplex::new(20)),
    ]
}

/// Small instances of every benchmark family.
pub fn suite_problems() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::ToyQuadratic { nx: 4, ny: 6, seed: 0 },
        ProblemSpec::SimpleSimilarity {
            n: 30,
            d: 8,
            r: 3,
            lambda: 0.01,
            seed: 0,
        },
        ProblemSpec::ShallowHyperrep {
            n: 20,
            d: 8,
            r: 3,
            lambda: 0.1,
            noise_sd: 0.1,
            seed: 0,
        },
        ProblemSpec::Robust {
            loss: LossKind::KarcherMean,
            n: 5,
            d: 4,
            seed: 0,
        },
        ProblemSpec::Robust {
            loss: LossKind::GaussianMle,
            n: 20,
            d: 4,
            seed: 0,
        },
        ProblemSpec::Saddle { x0: 1.0 },
        ProblemSpec::SphereSaddle { n: 5, m: 3, seed: 0 },
    ]
}

pub fn run_manifold_suite(n_samples: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let per: Vec<Vec<CheckReport>> = suite_manifolds()
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            check_manifold(m.as_ref(), n_samples, &mut rng)
        })
        .collect::<adarhd::Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

pub fn run_problem_suite(n_points: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let per: Vec<Vec<CheckReport>> = suite_problems()
        .par_iter()
        .enumerate()
        .map(|(i, spec)| -> Result<Vec<CheckReport>> {
            let p = spec.build()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(100 + i as u64));
            Ok(check_problem(p.as_ref(), n_points, FdOptions::default(), &mut rng)?)
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

pub fn run_all(n_samples: usize, n_points: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = run_manifold_suite(n_samples, seed)?;
    out.extend(run_problem_suite(n_points, seed)?);
    Ok(out)
}
