//! Non-adaptive Riemannian hypergradient descent (RHGD): fixed step sizes,
//! a fixed number of lower-level steps and conjugate gradient for the
//! linear system.

use serde::{Deserialize, Serialize};

use crate::adarhd::{check_hypergrad, Recorder, Row};
use crate::error::{Error, Result};
use crate::hypergradient::approx_hypergradient;
use crate::inner::tscg_solve;
use crate::manifold::{MapMode, Tangent};
use crate::problem::BilevelProblem;
use crate::trace::RunTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RHGDConfig {
    #[serde(rename = "T")]
    pub t: usize,
    pub eta_x: f64,
    pub eta_y: f64,
    /// Lower-level steps per outer iteration.
    pub inner_iters: usize,
    /// CG stops when the residual norm is at most `cg_tol`.
    pub cg_tol: f64,
    pub cg_cap: usize,
    pub map_mode: MapMode,
    pub track_error: bool,
}

impl Default for RHGDConfig {
    fn default() -> Self {
        Self {
            t: 200,
            eta_x: 0.5,
            eta_y: 0.5,
            inner_iters: 50,
            cg_tol: 1e-10,
            cg_cap: 50,
            map_mode: MapMode::Retract,
            track_error: false,
        }
    }
}

impl RHGDConfig {
    pub fn new(t: usize, eta: f64, inner_iters: usize) -> Self {
        Self {
            t,
            eta_x: eta,
            eta_y: eta,
            inner_iters,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        for (name, v) in [("eta_x", self.eta_x), ("eta_y", self.eta_y), ("cg_tol", self.cg_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn run_rhgd<P: BilevelProblem + ?Sized>(problem: &P, config: &RHGDConfig) -> Result<RunTrace> {
    config.validate()?;
    let mx = problem.upper().clone();
    let my = problem.lower().clone();
    let (mut x, mut y) = problem.initial_point();
    let mut v = Tangent::zero(&y);
    let mut rec = Recorder::new(
        format!("rhgd-{}", config.inner_iters),
        problem.name(),
        config.track_error,
    );
    for _ in 0..config.t {
        let step = (|| -> Result<_> {
            let mut yk = y.clone();
            for _ in 0..config.inner_iters {
                let g = problem.grad_g_y(&x, &yk)?;
                if !g.is_finite() {
                    return Err(Error::NonFinite("lower gradient".into()));
                }
                yk = my.step(&yk, &g.scale(-config.eta_y), config.map_mode)?;
            }
            let lin = tscg_solve(problem, &x, &yk, config.cg_tol, config.cg_cap)?;
            let hg = approx_hypergradient(problem, &x, &yk, &lin.solution)?;
            let row = Row {
                hypergrad_sq: mx.norm_sq(&hg),
                a: 0.0,
                k_t: config.inner_iters,
                n_t: lin.iterations,
                cap_hit: lin.cap_hit,
            };
            Ok((yk, lin.solution, hg, row))
        })();
        let (y_new, v_new, hg, mut row) = match step {
            Ok(s) => s,
            Err(e) => return Err(rec.fail(e)),
        };
        y = y_new;
        v = v_new;
        if let Err(reason) = check_hypergrad(row.hypergrad_sq) {
            return Err(rec.diverge(reason));
        }
        // constant step: the `a` column holds 1/eta_x
        row.a = 1.0 / config.eta_x;
        if let Err(e) = rec.record(problem, &x, &y, Some(&v), row) {
            return Err(rec.fail(e));
        }
        match mx.step(&x, &hg.scale(-config.eta_x), config.map_mode) {
            Ok(nx) => x = nx,
            Err(e) => return Err(rec.fail(e)),
        }
    }
    rec.set_final(&x, &y, Some(&v));
    Ok(rec.trace)
}
