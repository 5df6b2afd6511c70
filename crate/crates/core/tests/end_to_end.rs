use ::adarhd::hypergradient::dense_hypergradient;
use ::adarhd::*;

fn small_problems() -> Vec<ProblemSpec> {
    vec![
        ProblemSpec::ToyQuadratic { nx: 4, ny: 6, seed: 1 },
        ProblemSpec::SimpleSimilarity {
            n: 30,
            d: 8,
            r: 3,
            lambda: 0.01,
            seed: 1,
        },
        ProblemSpec::ShallowHyperrep {
            n: 30,
            d: 6,
            r: 3,
            lambda: 0.1,
            noise_sd: 0.1,
            seed: 1,
        },
        ProblemSpec::Robust {
            loss: LossKind::KarcherMean,
            n: 5,
            d: 4,
            seed: 1,
        },
        ProblemSpec::Robust {
            loss: LossKind::GaussianMle,
            n: 30,
            d: 4,
            seed: 1,
        },
    ]
}

#[test]
fn exact_oracles_agree_with_dense_solve() {
    for spec in small_problems() {
        let p = spec.build().unwrap();
        let (x, _) = p.initial_point();
        let ys = p.lower_closed_form(&x).unwrap().unwrap();
        let exact = p.exact_hypergradient(&x).unwrap().unwrap();
        let dense = dense_hypergradient(p.as_ref(), &x, &ys).unwrap();
        let rel = (exact.coords() - dense.coords()).norm() / dense.coords().norm().max(1e-12);
        assert!(rel <= 1e-6, "{}: rel {rel:e}", p.name());
    }
}

#[test]
fn lower_closed_forms_are_stationary() {
    for spec in small_problems() {
        let p = spec.build().unwrap();
        let (x, _) = p.initial_point();
        let ys = p.lower_closed_form(&x).unwrap().unwrap();
        let g = p.grad_g_y(&x, &ys).unwrap();
        assert!(p.lower().norm_sq(&g) <= 1e-12, "{}", p.name());
    }
}

#[test]
fn adarhd_reduces_the_hypergradient_on_every_benchmark() {
    for spec in small_problems() {
        let p = spec.build().unwrap();
        for mode in [InnerMode::Gd, InnerMode::Cg] {
            let cfg = AdaRHDConfig {
                inner_mode: mode,
                map_mode: MapMode::Retract,
                ..AdaRHDConfig::with_t(100)
            };
            let t = run_adarhd(p.as_ref(), &cfg).unwrap();
            assert_eq!(t.status, RunStatus::Ok);
            let e = t.ergodic();
            assert!(e[e.len() - 1] < 0.1 * e[0], "{} {mode:?}: {} -> {}", p.name(), e[0], e[e.len() - 1]);
        }
    }
}

#[test]
fn exp_and_retraction_coincide_on_flat_problems() {
    let p = ProblemSpec::ToyQuadratic { nx: 3, ny: 5, seed: 2 }.build().unwrap();
    let run = |m| {
        let cfg = AdaRHDConfig {
            map_mode: m,
            ..AdaRHDConfig::with_t(40)
        };
        run_adarhd(p.as_ref(), &cfg).unwrap().hypergrad_sq()
    };
    assert_eq!(run(MapMode::Exp), run(MapMode::Retract));
}

#[test]
fn oversized_fixed_steps_end_as_diverged_traces() {
    let p = ProblemSpec::ToyQuadratic { nx: 6, ny: 6, seed: 0 }.build().unwrap();
    let t = trace_or_diverged(run_rhgd(p.as_ref(), &RHGDConfig::new(200, 50.0, 5))).unwrap();
    assert_eq!(t.status, RunStatus::Diverged);
    assert!(t.len() < 200);
    assert_eq!(t.time_to(1e30), None);
    assert!(t.records.iter().all(|r| r.hypergrad_sq.is_finite()));
}

#[test]
fn trace_csv_roundtrip() {
    let p = ProblemSpec::Saddle { x0: 1.0 }.build().unwrap();
    let t = run_minmax(p.as_ref(), &AdaRHDConfig::with_t(30)).unwrap();
    let text = t.to_csv_string().unwrap();
    let back = RunTrace::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, t.records);
}
