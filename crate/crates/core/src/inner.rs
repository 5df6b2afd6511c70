//! Inner solvers: the adaptive lower-level descent, adaptive gradient
//! descent on the quadratic subproblem, and tangent-space conjugate gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergradient::quad_residual_with_rhs;
use crate::manifold::{Manifold, MapMode, Point, Tangent};
use crate::problem::BilevelProblem;

/// Residual recomputation period in CG.
pub const CG_REFRESH: usize = 50;

/// Cumulative squared-norm accumulator behind the step size `1 / sqrt(acc)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaState {
    accumulator: f64,
    initial: f64,
}

impl AdaState {
    pub fn new(initial: f64) -> Result<Self> {
        if !(initial > 0.0 && initial.is_finite()) {
            return Err(Error::Config(format!("initial step-size seed must be positive, got {initial}")));
        }
        Ok(Self {
            accumulator: initial * initial,
            initial,
        })
    }

    /// Add `sq` to the accumulator and return the new step size.
    pub fn update(&mut self, sq: f64) -> f64 {
        self.accumulator += sq;
        self.step()
    }

    pub fn step(&self) -> f64 {
        1.0 / self.accumulator.sqrt()
    }

    /// Current seed value, i.e. `sqrt(accumulator)`.
    pub fn value(&self) -> f64 {
        self.accumulator.sqrt()
    }

    pub fn accumulator(&self) -> f64 {
        self.accumulator
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn reset(&mut self) {
        self.accumulator = self.initial * self.initial;
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult<S> {
    pub solution: S,
    pub iterations: usize,
    /// Squared residual norm at `solution`.
    pub final_residual_sq: f64,
    pub cap_hit: bool,
    /// Squared residual norm before every iteration, then at the end.
    pub history: Vec<f64>,
}

fn finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn check_tol(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Tolerance(format!("tolerance must be positive, got {eps}")))
    }
}

/// Adaptive descent on `g(x, ·)` until `||G_y g||² <= eps_y` or `cap` steps.
///
/// The accumulator is updated before each step: `b² += ||G_y g||²`,
/// then `y <- Exp_y(-G_y g / b)` (or the retraction).
pub fn adaptive_lower_solve<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y_init: &Point,
    state: &mut AdaState,
    eps_y: f64,
    cap: usize,
    mode: MapMode,
) -> Result<InnerResult<Point>> {
    check_tol(eps_y)?;
    let my = problem.lower();
    let mut y = y_init.clone();
    let mut history = Vec::new();
    let mut k = 0;
    loop {
        let grad = problem.grad_g_y(x, &y)?;
        let r = finite("lower gradient", my.norm_sq(&grad))?;
        history.push(r);
        if r <= eps_y || k == cap {
            return Ok(InnerResult {
                solution: y,
                iterations: k,
                final_residual_sq: r,
                cap_hit: r > eps_y,
                history,
            });
        }
        let eta = state.update(r);
        y = my.step(&y, &grad.scale(-eta), mode)?;
        k += 1;
    }
}

/// Adaptive gradient descent on the quadratic subproblem at fixed `(x, ŷ)`,
/// stopping when `||∇_v R||² <= eps_v` (squared norm) or after `cap` steps.
pub fn adaptive_linear_solve_gd<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    v_init: &Tangent,
    state: &mut AdaState,
    eps_v: f64,
    cap: usize,
) -> Result<InnerResult<Tangent>> {
    check_tol(eps_v)?;
    let rhs = problem.grad_f_y(x, y)?;
    let mut v = v_init.clone();
    let mut history = Vec::new();
    let mut n = 0;
    loop {
        let res = quad_residual_with_rhs(problem, x, y, &v, &rhs)?;
        let r = finite("linear-system residual", res.norm_sq)?;
        history.push(r);
        if r <= eps_v || n == cap {
            return Ok(InnerResult {
                solution: v,
                iterations: n,
                final_residual_sq: r,
                cap_hit: r > eps_v,
                history,
            });
        }
        let eta = state.update(r);
        v.axpy(-eta, &res.value)?;
        n += 1;
    }
}

/// Conjugate gradient for `H_y g(x, ŷ)[v] = G_y f(x, ŷ)` from `v = 0`.
///
/// The loop runs while the residual norm (not squared) exceeds `eps_v`.
pub fn tscg_solve<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    eps_v: f64,
    cap: usize,
) -> Result<InnerResult<Tangent>> {
    let rhs = problem.grad_f_y(x, y)?;
    tscg(problem.lower().as_ref(), y, &rhs, |v| problem.hess_g_y_vec(x, y, v), eps_v, cap)
}

/// Conjugate gradient on `T_y M` for a self-adjoint operator `hess`.
///
/// The residual is updated recursively and recomputed from scratch every
/// [`CG_REFRESH`] iterations and before declaring convergence.
pub fn tscg<M, H>(
    m: &M,
    y: &Point,
    rhs: &Tangent,
    mut hess: H,
    eps_v: f64,
    cap: usize,
) -> Result<InnerResult<Tangent>>
where
    M: Manifold + ?Sized,
    H: FnMut(&Tangent) -> Result<Tangent>,
{
    check_tol(eps_v)?;
    m.check_base(y, rhs)?;
    let mut v = Tangent::zero(y);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = finite("cg residual", m.norm_sq(&r))?;
    let mut history = vec![rr];
    let mut n = 0;
    loop {
        if rr.sqrt() <= eps_v && n > 0 {
            // confirm against the true residual
            r = rhs.sub(&hess(&v)?)?;
            rr = finite("cg residual", m.norm_sq(&r))?;
            if rr.sqrt() <= eps_v {
                break;
            }
            p = r.clone();
        } else if rr.sqrt() <= eps_v {
            break;
        }
        if n == cap {
            break;
        }
        let hp = hess(&p)?;
        let curvature = m.inner(y, &p, &hp)?;
        if !(curvature > 0.0) {
            return Err(Error::Indefinite { curvature });
        }
        let alpha = rr / curvature;
        v.axpy(alpha, &p)?;
        n += 1;
        if n % CG_REFRESH == 0 {
            r = rhs.sub(&hess(&v)?)?;
        } else {
            r.axpy(-alpha, &hp)?;
        }
        let rr_new = finite("cg residual", m.norm_sq(&r))?;
        history.push(rr_new);
        let beta = rr_new / rr;
        p = r.add(&p.scale(beta))?;
        rr = rr_new;
    }
    Ok(InnerResult {
        solution: v,
        iterations: n,
        final_residual_sq: rr,
        cap_hit: rr.sqrt() > eps_v,
        history,
    })
}
