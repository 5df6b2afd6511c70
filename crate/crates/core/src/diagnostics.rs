//! Finite-difference checks of problem oracles and property checks of the
//! manifold geometries.
//!
//! Every check returns a [`CheckReport`] holding the worst relative error
//! seen over its samples; `pass` is `max_rel_error <= threshold`.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point, Tangent};
use crate::problem::{fd_cross_g_xy_vec, fd_cross_g_yx_vec, fd_hess_g_y_vec, BilevelProblem, DEFAULT_FD_STEP};

/// First-order checks (gradients against central differences).
pub const FIRST_ORDER_TOL: f64 = 1e-5;
/// Analytic Hessian-vector and cross products against FD of the gradients.
pub const PRODUCT_TOL: f64 = 1e-4;
/// Double finite differences.
pub const SECOND_ORDER_TOL: f64 = 1e-3;
pub const ROUNDTRIP_TOL: f64 = 1e-8;
pub const ISOMETRY_TOL: f64 = 1e-10;
pub const TRIG_SLACK_TOL: f64 = 1e-8;
/// Allowed growth of `||R_x(tu) - Exp_x(tu)|| / t²` as `t` halves.
pub const RETRACTION_RATIO_TOL: f64 = 0.5;

const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub max_rel_error: f64,
    pub samples: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check_name: impl Into<String>, errors: &[f64], threshold: f64) -> Self {
        // NaN counts as the worst possible error
        let max_rel_error = errors
            .iter()
            .fold(0.0f64, |m, &e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
        Self {
            check_name: check_name.into(),
            max_rel_error,
            samples: errors.len(),
            threshold,
            pass: max_rel_error <= threshold,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.check_name = name.into();
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<48} max_rel_err={:.3e} threshold={:.0e} samples={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.check_name,
            self.max_rel_error,
            self.threshold,
            self.samples
        )
    }
}

/// Render reports as an aligned text table.
pub fn report_table(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub n_dirs: usize,
    pub h: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            n_dirs: 10,
            h: DEFAULT_FD_STEP,
        }
    }
}

fn unit_tangent(m: &dyn Manifold, x: &Point, rng: &mut dyn RngCore) -> Tangent {
    let u = m.sample_tangent(x, rng);
    let n = m.norm(&u);
    if n > 0.0 {
        u.scale(1.0 / n)
    } else {
        u
    }
}

/// Compare `<grad, u>_x` with `[f(Exp_x(hu)) - f(Exp_x(-hu))] / 2h` over
/// random unit directions. Errors are relative to `||grad||_x`.
pub fn check_gradient(
    m: &dyn Manifold,
    x: &Point,
    f: &dyn Fn(&Point) -> Result<f64>,
    grad: &Tangent,
    opts: FdOptions,
    rng: &mut dyn RngCore,
) -> Result<CheckReport> {
    if opts.n_dirs == 0 {
        return Err(Error::Config("gradient check needs at least one direction".into()));
    }
    m.check_base(x, grad)?;
    let scale = m.norm(grad).max(SCALE_FLOOR);
    let mut errs = Vec::with_capacity(opts.n_dirs);
    for _ in 0..opts.n_dirs {
        let u = unit_tangent(m, x, rng);
        let fp = f(&m.exp(x, &u.scale(opts.h))?)?;
        let fm = f(&m.exp(x, &u.scale(-opts.h))?)?;
        let fd = (fp - fm) / (2.0 * opts.h);
        errs.push((m.inner(x, grad, &u)? - fd).abs() / scale);
    }
    Ok(CheckReport::new("gradient", &errs, FIRST_ORDER_TOL))
}

fn rel_diff(m: &dyn Manifold, a: &Tangent, b: &Tangent) -> Result<f64> {
    let d = m.norm(&a.sub(b)?);
    Ok(d / m.norm(a).max(m.norm(b)).max(SCALE_FLOOR))
}

/// Property suite for one geometry:
///
/// * `exp`/`log` roundtrip and `dist(x, Exp_x u) = ||u||` at
///   `||u|| = min(1/2, exp_radius / 2)`;
/// * transport isometry, where the geometry asserts it;
/// * growth of the retraction error ratio `||R_x(tu) - Exp_x(tu)|| / t²`
///   over `t ∈ {1, 1/2, 1/4}`;
/// * the trigonometric distance bound, where a curvature lower bound is known.
pub fn check_manifold(m: &dyn Manifold, n_samples: usize, rng: &mut dyn RngCore) -> Result<Vec<CheckReport>> {
    let id = m.id().to_string();
    let mut roundtrip = Vec::new();
    let mut distance = Vec::new();
    let mut isometry = Vec::new();
    let mut retraction = Vec::new();
    let mut trig = Vec::new();
    let curvature = m.curvature_lower_bound();
    for _ in 0..n_samples {
        let x = m.sample_point(rng);
        let radius = 0.5f64.min(0.5 * m.exp_radius(x.coords()));
        let u = unit_tangent(m, &x, rng).scale(radius);
        let y = m.exp(&x, &u)?;
        m.check_point(&y)?;
        let back = m.log(&x, &y)?;
        let y2 = m.exp(&x, &back)?;
        roundtrip.push(
            (rel_diff(m, &back, &u)?).max((y2.coords() - y.coords()).norm() / y.coords().norm().max(1.0)),
        );
        distance.push((m.distance(&x, &y)? - m.norm(&u)).abs() / m.norm(&u));

        if m.isometric_transport() {
            let w = m.sample_tangent(&x, rng);
            let pu = m.transport(&x, &y, &u)?;
            let pw = m.transport(&x, &y, &w)?;
            let before = m.inner(&x, &u, &w)?;
            let after = m.inner(&y, &pu, &pw)?;
            let scale = (m.norm(&u) * m.norm(&w)).max(SCALE_FLOOR);
            let norm_err = (m.norm(&pw) - m.norm(&w)).abs() / m.norm(&w).max(SCALE_FLOOR);
            isometry.push(norm_err.max((after - before).abs() / scale));
        }

        let mut ratios = Vec::new();
        for t in [1.0, 0.5, 0.25] {
            let ut = u.scale(t);
            let r = m.retract(&x, &ut)?;
            let e = m.exp(&x, &ut)?;
            ratios.push((r.coords() - e.coords()).norm() / (t * t));
        }
        let growth = ratios
            .windows(2)
            .map(|w| if w[0] <= SCALE_FLOOR { 0.0 } else { (w[1] / w[0] - 1.0).max(0.0) })
            .fold(0.0, f64::max);
        retraction.push(growth);

        if let Some(tau) = curvature {
            // triangle (x, Exp_x u, Exp_x w) with all sides at most 2
            let a = unit_tangent(m, &x, rng).scale(0.2 + 0.8 * unit01(rng));
            let b = unit_tangent(m, &x, rng).scale(0.2 + 0.8 * unit01(rng));
            let ya = m.exp(&x, &a)?;
            let yb = m.exp(&x, &b)?;
            let lhs = m.distance(&ya, &yb)?.powi(2);
            let c = m.norm(&b);
            let rhs = zeta(tau, c) * m.norm_sq(&a) + m.norm_sq(&b) - 2.0 * m.inner(&x, &a, &b)?;
            trig.push((lhs - rhs).max(0.0));
        }
    }
    let mut out = vec![
        CheckReport::new(format!("{id}: exp/log roundtrip"), &roundtrip, ROUNDTRIP_TOL),
        CheckReport::new(format!("{id}: distance = |log|"), &distance, ROUNDTRIP_TOL),
    ];
    if m.isometric_transport() {
        out.push(CheckReport::new(format!("{id}: transport isometry"), &isometry, ISOMETRY_TOL));
    }
    out.push(CheckReport::new(
        format!("{id}: retraction error ratio growth"),
        &retraction,
        RETRACTION_RATIO_TOL,
    ));
    if curvature.is_some() {
        out.push(CheckReport::new(format!("{id}: trigonometric bound violation"), &trig, TRIG_SLACK_TOL));
    }
    Ok(out)
}

fn unit01(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// `sqrt(|τ|) c / tanh(sqrt(|τ|) c)`, equal to 1 in the flat limit.
pub fn zeta(tau: f64, c: f64) -> f64 {
    let s = tau.abs().sqrt() * c;
    if s < 1e-8 {
        1.0
    } else {
        s / s.tanh()
    }
}

/// `<G²_xy g[v], u>_x` against `<v, G²_yx g[u]>_y`, both sides by finite
/// differences of the first-order oracles.
pub fn check_adjoint<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    n_pairs: usize,
    rng: &mut dyn RngCore,
) -> Result<CheckReport> {
    let (mx, my) = (problem.upper(), problem.lower());
    let mut errs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let u = unit_tangent(mx.as_ref(), x, rng);
        let v = unit_tangent(my.as_ref(), y, rng);
        let cxy = fd_cross_g_xy_vec(problem, x, y, &v, DEFAULT_FD_STEP)?;
        let cyx = fd_cross_g_yx_vec(problem, x, y, &u, DEFAULT_FD_STEP)?;
        let lhs = mx.inner(x, &cxy, &u)?;
        let rhs = my.inner(y, &v, &cyx)?;
        let scale = mx.norm(&cxy).max(my.norm(&cyx)).max(1e-6);
        errs.push((lhs - rhs).abs() / scale);
    }
    Ok(CheckReport::new("adjoint consistency", &errs, SECOND_ORDER_TOL))
}

/// Every oracle of `problem` at `n_points` random `(x, y)`:
/// four gradients (first order), the Hessian-vector and cross products
/// against FD of the gradients, and adjoint consistency.
pub fn check_problem<P: BilevelProblem + ?Sized>(
    problem: &P,
    n_points: usize,
    opts: FdOptions,
    rng: &mut dyn RngCore,
) -> Result<Vec<CheckReport>> {
    let name = problem.name().to_string();
    let (mx, my) = (problem.upper().clone(), problem.lower().clone());
    let has_grad_g_x = {
        let (x0, y0) = problem.initial_point();
        !matches!(problem.grad_g_x(&x0, &y0), Err(Error::Unsupported(_)))
    };
    let mut errs: [Vec<f64>; 7] = Default::default();
    for _ in 0..n_points {
        let x = mx.sample_point(rng);
        let y = my.sample_point(rng);
        let fx = |p: &Point| problem.f(p, &y);
        let fy = |p: &Point| problem.f(&x, p);
        let gx = |p: &Point| problem.g(p, &y);
        let gy = |p: &Point| problem.g(&x, p);
        let r = check_gradient(mx.as_ref(), &x, &fx, &problem.grad_f_x(&x, &y)?, opts, rng)?;
        errs[0].push(r.max_rel_error);
        let r = check_gradient(my.as_ref(), &y, &fy, &problem.grad_f_y(&x, &y)?, opts, rng)?;
        errs[1].push(r.max_rel_error);
        let r = check_gradient(my.as_ref(), &y, &gy, &problem.grad_g_y(&x, &y)?, opts, rng)?;
        errs[2].push(r.max_rel_error);
        if has_grad_g_x {
            let r = check_gradient(mx.as_ref(), &x, &gx, &problem.grad_g_x(&x, &y)?, opts, rng)?;
            errs[3].push(r.max_rel_error);
        }
        for _ in 0..opts.n_dirs.min(3) {
            let v = my.sample_tangent(&y, rng);
            let h = problem.hess_g_y_vec(&x, &y, &v)?;
            errs[4].push(rel_diff(my.as_ref(), &h, &fd_hess_g_y_vec(problem, &x, &y, &v, opts.h)?)?);
            if has_grad_g_x {
                let c = problem.cross_g_xy_vec(&x, &y, &v)?;
                errs[5].push(rel_diff(mx.as_ref(), &c, &fd_cross_g_xy_vec(problem, &x, &y, &v, opts.h)?)?);
            }
        }
        if has_grad_g_x {
            errs[6].push(check_adjoint(problem, &x, &y, 2, rng)?.max_rel_error);
        }
    }
    let labels = [
        ("grad_f_x", FIRST_ORDER_TOL),
        ("grad_f_y", FIRST_ORDER_TOL),
        ("grad_g_y", FIRST_ORDER_TOL),
        ("grad_g_x", FIRST_ORDER_TOL),
        ("hess_g_y_vec vs fd", PRODUCT_TOL),
        ("cross_g_xy_vec vs fd", PRODUCT_TOL),
        ("adjoint consistency", SECOND_ORDER_TOL),
    ];
    Ok(labels
        .iter()
        .zip(errs.iter())
        .filter(|(_, e)| !e.is_empty())
        .map(|((label, tol), e)| CheckReport::new(format!("{name}: {label}"), e, *tol))
        .collect())
}

/// Oracle selector for [`Corrupted`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    GradFX,
    GradFY,
    GradGX,
    GradGY,
    HessGY,
    CrossGXY,
}

/// Wraps a problem and scales one oracle's output by `factor`; a negative
/// control for the checks above.
pub struct Corrupted<P> {
    pub inner: P,
    pub oracle: Oracle,
    pub factor: f64,
}

impl<P: BilevelProblem> Corrupted<P> {
    fn apply(&self, which: Oracle, t: Result<Tangent>) -> Result<Tangent> {
        if which == self.oracle {
            t.map(|t| t.scale(self.factor))
        } else {
            t
        }
    }
}

impl<P: BilevelProblem> BilevelProblem for Corrupted<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn upper(&self) -> &crate::manifold::Geometry {
        self.inner.upper()
    }
    fn lower(&self) -> &crate::manifold::Geometry {
        self.inner.lower()
    }
    fn initial_point(&self) -> (Point, Point) {
        self.inner.initial_point()
    }
    fn f(&self, x: &Point, y: &Point) -> Result<f64> {
        self.inner.f(x, y)
    }
    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        self.inner.g(x, y)
    }
    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.apply(Oracle::GradFX, self.inner.grad_f_x(x, y))
    }
    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.apply(Oracle::GradFY, self.inner.grad_f_y(x, y))
    }
    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.apply(Oracle::GradGY, self.inner.grad_g_y(x, y))
    }
    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.apply(Oracle::GradGX, self.inner.grad_g_x(x, y))
    }
    fn hess_g_y_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        self.apply(Oracle::HessGY, self.inner.hess_g_y_vec(x, y, v))
    }
    fn cross_g_xy_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        self.apply(Oracle::CrossGXY, self.inner.cross_g_xy_vec(x, y, v))
    }
}
