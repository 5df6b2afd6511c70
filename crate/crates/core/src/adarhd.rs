//! The AdaRHD outer loop (exponential-map and retraction variants) and its
//! min-max specialization.

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hypergradient::{approx_hypergradient, hypergradient_error};
use crate::inner::{adaptive_linear_solve_gd, adaptive_lower_solve, tscg_solve, AdaState};
use crate::manifold::{ArrayRecord, Geometry, MapMode, Point, Tangent};
use crate::problem::BilevelProblem;
use crate::trace::{IterRecord, RowStatus, RunStatus, RunTrace};

/// `||ĜF||²` above which a run is declared diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InnerMode {
    #[default]
    Gd,
    Cg,
}

/// Iteration cap of an inner loop as a function of the outer index `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapSchedule {
    /// `min{50 floor(t/5), 500}`, but never below 50.
    #[default]
    Staged,
    Fixed(usize),
}

impl CapSchedule {
    pub fn cap(&self, t: usize) -> usize {
        match *self {
            CapSchedule::Staged => (50 * (t / 5)).clamp(50, 500),
            CapSchedule::Fixed(n) => n,
        }
    }
}

impl fmt::Display for CapSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapSchedule::Staged => f.write_str("staged"),
            CapSchedule::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for CapSchedule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CapSchedule::Staged => s.serialize_str("staged"),
            CapSchedule::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for CapSchedule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(CapSchedule::Fixed(n as usize)),
            Raw::S(s) if s == "staged" => Ok(CapSchedule::Staged),
            Raw::S(s) => Err(serde::de::Error::custom(format!(
                "cap must be \"staged\" or an integer, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaRHDConfig {
    /// Outer iteration budget.
    #[serde(rename = "T")]
    pub t: usize,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub inner_mode: InnerMode,
    pub map_mode: MapMode,
    /// Lower-level tolerance on `||G_y g||²`; defaults to `1/T`.
    pub eps_y: Option<f64>,
    /// Linear-system tolerance; squared residual in gd mode, residual norm
    /// in cg mode. Defaults to `1/T`.
    pub eps_v: Option<f64>,
    pub lower_cap: CapSchedule,
    pub linear_cap: CapSchedule,
    /// Reset `b` and `c` at every outer iteration (ablation).
    pub reset_inner: bool,
    /// Stop once `||ĜF||²` falls to `early_stop_threshold` (default `1/T`).
    pub early_stop: bool,
    pub early_stop_threshold: Option<f64>,
    /// Record `||ĜF - GF||` when the problem has an exact oracle.
    pub track_error: bool,
}

impl Default for AdaRHDConfig {
    fn default() -> Self {
        Self {
            t: 100,
            a0: 1.0,
            b0: 1.0,
            c0: 1.0,
            inner_mode: InnerMode::Gd,
            map_mode: MapMode::Exp,
            eps_y: None,
            eps_v: None,
            lower_cap: CapSchedule::Staged,
            linear_cap: CapSchedule::Staged,
            reset_inner: false,
            early_stop: false,
            early_stop_threshold: None,
            track_error: false,
        }
    }
}

impl AdaRHDConfig {
    pub fn with_t(t: usize) -> Self {
        Self {
            t,
            ..Default::default()
        }
    }

    /// Set `a0 = b0 = c0 = s`.
    pub fn seeds(mut self, s: f64) -> Self {
        self.a0 = s;
        self.b0 = s;
        self.c0 = s;
        self
    }

    pub fn eps_y(&self) -> f64 {
        self.eps_y.unwrap_or(1.0 / self.t as f64)
    }

    pub fn eps_v(&self) -> f64 {
        self.eps_v.unwrap_or(1.0 / self.t as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        for (name, v) in [("a0", self.a0), ("b0", self.b0), ("c0", self.c0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("eps_y", self.eps_y()),
            ("eps_v", self.eps_v()),
            ("early_stop_threshold", self.early_stop_threshold.unwrap_or(1.0)),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.inner_mode == InnerMode::Cg && self.c0 != 1.0 {
            log::warn!("c0 = {} is ignored in cg mode", self.c0);
        }
        Ok(())
    }

    pub fn algorithm_name(&self) -> String {
        let base = match self.map_mode {
            MapMode::Exp => "adarhd",
            MapMode::Retract => "adarhd_r",
        };
        match self.inner_mode {
            InnerMode::Gd => format!("{base}-gd"),
            InnerMode::Cg => format!("{base}-cg"),
        }
    }
}

/// Bookkeeping shared by the outer loops: solver clock, records and the
/// conversion of numerical failures into divergence.
pub(crate) struct Recorder {
    pub trace: RunTrace,
    start: Instant,
    excluded: Duration,
    track_error: bool,
}

pub(crate) struct Row {
    pub hypergrad_sq: f64,
    pub a: f64,
    pub k_t: usize,
    pub n_t: usize,
    pub cap_hit: bool,
}

impl Recorder {
    pub fn new(algorithm: String, problem: &str, track_error: bool) -> Self {
        Self {
            trace: RunTrace::new(algorithm, problem),
            start: Instant::now(),
            excluded: Duration::ZERO,
            track_error,
        }
    }

    fn solver_time(&self) -> f64 {
        (self.start.elapsed().saturating_sub(self.excluded)).as_secs_f64()
    }

    /// Append a row; objective and error evaluation are kept off the clock.
    pub fn record<P: BilevelProblem + ?Sized>(
        &mut self,
        problem: &P,
        x: &Point,
        y: &Point,
        v: Option<&Tangent>,
        row: Row,
    ) -> Result<()> {
        let time_s = self.solver_time();
        let diag_start = Instant::now();
        let upper_obj = problem.f(x, y)?;
        let hypergrad_error = match (self.track_error, v) {
            (true, Some(v)) => match hypergradient_error(problem, x, y, v) {
                Ok(e) => Some(e),
                Err(Error::Unsupported(_)) => None,
                Err(e) => return Err(e),
            },
            (true, None) => match problem.exact_hypergradient(x) {
                Some(exact) => {
                    let exact = exact?;
                    let approx = problem.grad_f_x(x, y)?;
                    Some(problem.upper().norm(&approx.sub(&exact)?))
                }
                None => None,
            },
            _ => None,
        };
        if row.cap_hit {
            self.trace.cap_hits += 1;
        }
        self.trace.records.push(IterRecord {
            t: self.trace.records.len(),
            hypergrad_sq: row.hypergrad_sq,
            a: row.a,
            k_t: row.k_t,
            n_t: row.n_t,
            upper_obj,
            time_s,
            hypergrad_error,
            status: if row.cap_hit { RowStatus::Cap } else { RowStatus::Ok },
        });
        self.excluded += diag_start.elapsed();
        Ok(())
    }

    pub fn set_final(&mut self, x: &Point, y: &Point, v: Option<&Tangent>) {
        self.trace.final_x = Some(ArrayRecord::from_point(x));
        self.trace.final_y = Some(ArrayRecord::from_point(y));
        self.trace.final_v = v.map(ArrayRecord::from_tangent);
    }

    /// Wrap a numerical failure as divergence carrying the partial trace.
    pub fn fail(self, err: Error) -> Error {
        if err.is_numerical() {
            self.diverge(err.to_string())
        } else {
            err
        }
    }

    pub fn diverge(mut self, reason: String) -> Error {
        self.trace.status = RunStatus::Diverged;
        if let Some(last) = self.trace.records.last_mut() {
            last.status = RowStatus::Diverged;
        }
        log::info!("{} on {} diverged: {reason}", self.trace.algorithm, self.trace.problem);
        Error::Diverged {
            reason,
            trace: Box::new(self.trace),
        }
    }
}

pub(crate) fn check_hypergrad(sq: f64) -> std::result::Result<(), String> {
    if !sq.is_finite() {
        Err("non-finite hypergradient".into())
    } else if sq > DIVERGENCE_THRESHOLD {
        Err(format!("||hypergradient||² = {sq:e} exceeds {DIVERGENCE_THRESHOLD:e}"))
    } else {
        Ok(())
    }
}

/// Turn a divergence error into its trace (status `diverged`); other
/// errors pass through.
pub fn trace_or_diverged(r: Result<RunTrace>) -> Result<RunTrace> {
    match r {
        Ok(t) => Ok(t),
        Err(Error::Diverged { trace, .. }) => Ok(*trace),
        Err(e) => Err(e),
    }
}

enum Estimator {
    Linear(InnerMode),
    /// Min-max: `ĜF = G_x f(x, ŷ)`.
    None,
}

/// Run AdaRHD (or AdaRHD-R with `map_mode = retract`) for `T` outer
/// iterations from the problem's initial point.
pub fn run_adarhd<P: BilevelProblem + ?Sized>(problem: &P, config: &AdaRHDConfig) -> Result<RunTrace> {
    config.validate()?;
    let name = config.algorithm_name();
    outer_loop(problem, config, Estimator::Linear(config.inner_mode), name)
}

/// AdaRHD for `min_x max_y f(x, y)`: the lower level minimizes `-f` and the
/// hypergradient is `G_x f(x, ŷ)`, so no linear system is solved.
pub fn run_minmax<P: BilevelProblem + ?Sized>(problem: &P, config: &AdaRHDConfig) -> Result<RunTrace> {
    config.validate()?;
    let view = MinMaxView { inner: problem };
    let name = match config.map_mode {
        MapMode::Exp => "minmax".to_string(),
        MapMode::Retract => "minmax_r".to_string(),
    };
    outer_loop(&view, config, Estimator::None, name)
}

fn outer_loop<P: BilevelProblem + ?Sized>(
    problem: &P,
    config: &AdaRHDConfig,
    estimator: Estimator,
    name: String,
) -> Result<RunTrace> {
    let mx = problem.upper().clone();
    let my = problem.lower().clone();
    let (mut x, mut y) = problem.initial_point();
    let mut v = Tangent::zero(&y);
    let mut a = AdaState::new(config.a0)?;
    let mut b = AdaState::new(config.b0)?;
    let mut c = AdaState::new(config.c0)?;
    let (eps_y, eps_v) = (config.eps_y(), config.eps_v());
    let stop_at = config.early_stop_threshold.unwrap_or(1.0 / config.t as f64);
    let mut rec = Recorder::new(name, problem.name(), config.track_error);

    for t in 0..config.t {
        if config.reset_inner {
            b.reset();
            c.reset();
        }
        let step = (|| -> Result<(Point, Tangent, Tangent, Row)> {
            let lower = adaptive_lower_solve(
                problem,
                &x,
                &y,
                &mut b,
                eps_y,
                config.lower_cap.cap(t),
                config.map_mode,
            )?;
            let y_new = lower.solution;
            let (v_new, n_t, lin_cap) = match estimator {
                Estimator::Linear(InnerMode::Gd) => {
                    let v0 = my.transport(&y, &y_new, &v)?;
                    let out = adaptive_linear_solve_gd(
                        problem,
                        &x,
                        &y_new,
                        &v0,
                        &mut c,
                        eps_v,
                        config.linear_cap.cap(t),
                    )?;
                    (out.solution, out.iterations, out.cap_hit)
                }
                Estimator::Linear(InnerMode::Cg) => {
                    let out = tscg_solve(problem, &x, &y_new, eps_v, config.linear_cap.cap(t))?;
                    (out.solution, out.iterations, out.cap_hit)
                }
                Estimator::None => (Tangent::zero(&y_new), 0, false),
            };
            let hg = match estimator {
                Estimator::None => problem.grad_f_x(&x, &y_new)?,
                Estimator::Linear(_) => approx_hypergradient(problem, &x, &y_new, &v_new)?,
            };
            let hsq = mx.norm_sq(&hg);
            let row = Row {
                hypergrad_sq: hsq,
                a: 0.0,
                k_t: lower.iterations,
                n_t,
                cap_hit: lower.cap_hit || lin_cap,
            };
            Ok((y_new, v_new, hg, row))
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
        let eta = a.update(row.hypergrad_sq);
        row.a = a.value();
        let hsq = row.hypergrad_sq;
        let v_rec = match estimator {
            Estimator::None => None,
            Estimator::Linear(_) => Some(&v),
        };
        if let Err(e) = rec.record(problem, &x, &y, v_rec, row) {
            return Err(rec.fail(e));
        }
        if config.early_stop && hsq <= stop_at {
            rec.trace.status = RunStatus::EarlyStop;
            break;
        }
        match mx.step(&x, &hg.scale(-eta), config.map_mode) {
            Ok(nx) => x = nx,
            Err(e) => return Err(rec.fail(e)),
        }
    }
    let v_final = match estimator {
        Estimator::None => None,
        Estimator::Linear(_) => Some(&v),
    };
    rec.set_final(&x, &y, v_final);
    Ok(rec.trace)
}

/// A problem seen as `min_x max_y f`: `g = -f`.
struct MinMaxView<'a, P: ?Sized> {
    inner: &'a P,
}

impl<P: BilevelProblem + ?Sized> BilevelProblem for MinMaxView<'_, P> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn upper(&self) -> &Geometry {
        self.inner.upper()
    }
    fn lower(&self) -> &Geometry {
        self.inner.lower()
    }
    fn initial_point(&self) -> (Point, Point) {
        self.inner.initial_point()
    }
    fn f(&self, x: &Point, y: &Point) -> Result<f64> {
        self.inner.f(x, y)
    }
    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(-self.inner.f(x, y)?)
    }
    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.inner.grad_f_x(x, y)
    }
    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.inner.grad_f_y(x, y)
    }
    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(self.inner.grad_f_y(x, y)?.scale(-1.0))
    }
    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(self.inner.grad_f_x(x, y)?.scale(-1.0))
    }
    fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
        self.inner.lower_closed_form(x)
    }
    /// The min-max hypergradient is `G_x f(x, y*(x))`.
    fn exact_hypergradient(&self, x: &Point) -> Option<Result<Tangent>> {
        let y = self.inner.lower_closed_form(x)?;
        Some(y.and_then(|y| self.inner.grad_f_x(x, &y)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::manifold::Euclidean;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    /// `g = ½||y - c ⊙ x||²`, `f = ½||y||²`.
    struct Toy {
        m: Geometry,
        c: Mat,
        x0: Mat,
    }

    impl Toy {
        fn new(c: &[f64], x0: &[f64]) -> Self {
            Self {
                m: Arc::new(Euclidean::vector(c.len())),
                c: Mat::from_column_slice(c.len(), 1, c),
                x0: Mat::from_column_slice(x0.len(), 1, x0),
            }
        }
    }

    impl BilevelProblem for Toy {
        fn name(&self) -> &str {
            "toy"
        }
        fn upper(&self) -> &Geometry {
            &self.m
        }
        fn lower(&self) -> &Geometry {
            &self.m
        }
        fn initial_point(&self) -> (Point, Point) {
            (
                self.m.point(self.x0.clone()).unwrap(),
                self.m.point(Mat::zeros(self.c.nrows(), 1)).unwrap(),
            )
        }
        fn f(&self, _x: &Point, y: &Point) -> Result<f64> {
            Ok(0.5 * y.coords().norm_squared())
        }
        fn g(&self, x: &Point, y: &Point) -> Result<f64> {
            Ok(0.5 * (y.coords() - self.c.component_mul(x.coords())).norm_squared())
        }
        fn grad_f_x(&self, x: &Point, _y: &Point) -> Result<Tangent> {
            Ok(Tangent::zero(x))
        }
        fn grad_f_y(&self, _x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(y, y.coords().clone()))
        }
        fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(y, y.coords() - self.c.component_mul(x.coords())))
        }
        fn hess_g_y_vec(&self, _x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
            Ok(Tangent::new(y, v.coords().clone()))
        }
        fn cross_g_xy_vec(&self, x: &Point, _y: &Point, v: &Tangent) -> Result<Tangent> {
            Ok(Tangent::new(x, -self.c.component_mul(v.coords())))
        }
        fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
            Some(self.m.point(self.c.component_mul(x.coords())))
        }
    }

    #[test]
    fn cap_schedule() {
        let s = CapSchedule::Staged;
        assert_eq!(s.cap(0), 50);
        assert_eq!(s.cap(12), 100);
        assert_eq!(s.cap(10_000), 500);
        assert_eq!(CapSchedule::Fixed(7).cap(100), 7);
    }

    #[test]
    fn single_step_matches_unrolled_update() {
        let p = Toy::new(&[1.0, 2.0], &[1.0, 1.0]);
        let mut cfg = AdaRHDConfig::with_t(1);
        cfg.eps_y = Some(1e-20);
        cfg.eps_v = Some(1e-20);
        cfg.lower_cap = CapSchedule::Fixed(10_000);
        cfg.linear_cap = CapSchedule::Fixed(10_000);
        let tr = run_adarhd(&p, &cfg).unwrap();
        let r = &tr.records[0];
        let expected_sq = 1.0 + 16.0; // ∇F = c² ⊙ x
        assert_relative_eq!(r.hypergrad_sq, expected_sq, max_relative = 1e-6);
        assert_relative_eq!(r.a, (1.0 + r.hypergrad_sq).sqrt(), max_relative = 1e-14);
        let x1 = tr.final_x.unwrap().to_matrix().unwrap();
        assert_relative_eq!(x1[(1, 0)], 1.0 - 4.0 / r.a, max_relative = 1e-6);
    }

    #[test]
    fn stationary_start_stays_put() {
        let p = Toy::new(&[1.0, 2.0], &[0.0, 0.0]);
        let tr = run_adarhd(&p, &AdaRHDConfig::with_t(5)).unwrap();
        for r in &tr.records {
            assert_eq!(r.hypergrad_sq, 0.0);
            assert_eq!(r.a, 1.0);
            assert_eq!(r.k_t, 0);
        }
        assert_eq!(tr.final_x.unwrap().data, vec![0.0, 0.0]);
    }

    #[test]
    fn accumulator_replays_from_trace() {
        let p = Toy::new(&[1.0, 2.0], &[1.0, 1.0]);
        for mode in [InnerMode::Gd, InnerMode::Cg] {
            let cfg = AdaRHDConfig {
                inner_mode: mode,
                ..AdaRHDConfig::with_t(50)
            };
            let tr = run_adarhd(&p, &cfg).unwrap();
            let mut acc = 1.0f64;
            for r in &tr.records {
                acc += r.hypergrad_sq;
                assert_relative_eq!(r.a, acc.sqrt(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn early_stop_respects_threshold() {
        let p = Toy::new(&[1.0, 2.0], &[1.0, 1.0]);
        let cfg = AdaRHDConfig {
            early_stop: true,
            ..AdaRHDConfig::with_t(400)
        };
        let tr = run_adarhd(&p, &cfg).unwrap();
        assert_eq!(tr.status, RunStatus::EarlyStop);
        assert!(tr.records.last().unwrap().hypergrad_sq <= 1.0 / 400.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let p = Toy::new(&[1.0], &[1.0]);
        assert!(matches!(run_adarhd(&p, &AdaRHDConfig::with_t(0)), Err(Error::Config(_))));
        let cfg = AdaRHDConfig::with_t(3).seeds(-1.0);
        assert!(matches!(run_adarhd(&p, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = AdaRHDConfig {
            inner_mode: InnerMode::Cg,
            map_mode: MapMode::Retract,
            linear_cap: CapSchedule::Fixed(50),
            eps_v: Some(1e-10),
            ..AdaRHDConfig::with_t(1000).seeds(2.0)
        };
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"T\":1000"));
        assert!(s.contains("\"lower_cap\":\"staged\""));
        let back: AdaRHDConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }

    /// `f(x, y) = ½||x||² - ½||y||²`: no coupling between x and y.
    struct Decoupled {
        m: Geometry,
    }

    impl BilevelProblem for Decoupled {
        fn name(&self) -> &str {
            "decoupled"
        }
        fn upper(&self) -> &Geometry {
            &self.m
        }
        fn lower(&self) -> &Geometry {
            &self.m
        }
        fn initial_point(&self) -> (Point, Point) {
            (
                self.m.point(Mat::from_column_slice(2, 1, &[3.0, -1.0])).unwrap(),
                self.m.point(Mat::zeros(2, 1)).unwrap(),
            )
        }
        fn f(&self, x: &Point, y: &Point) -> Result<f64> {
            Ok(0.5 * x.coords().norm_squared() - 0.5 * y.coords().norm_squared())
        }
        fn g(&self, x: &Point, y: &Point) -> Result<f64> {
            Ok(-self.f(x, y)?)
        }
        fn grad_f_x(&self, x: &Point, _y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(x, x.coords().clone()))
        }
        fn grad_f_y(&self, _x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(y, -y.coords()))
        }
        fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
            Ok(self.grad_f_y(x, y)?.scale(-1.0))
        }
    }

    #[test]
    fn minmax_without_coupling_is_adagrad_norm() {
        let p = Decoupled {
            m: Arc::new(Euclidean::vector(2)),
        };
        let tr = run_minmax(&p, &AdaRHDConfig::with_t(30).seeds(0.5)).unwrap();
        let mut x = Mat::from_column_slice(2, 1, &[3.0, -1.0]);
        let mut acc = 0.25;
        for r in &tr.records {
            let g = x.clone();
            assert_eq!(r.n_t, 0);
            assert_relative_eq!(r.hypergrad_sq, g.norm_squared(), max_relative = 1e-14);
            acc += g.norm_squared();
            x -= g / f64::sqrt(acc);
        }
        let fx = tr.final_x.unwrap().to_matrix().unwrap();
        assert_relative_eq!(fx, x, max_relative = 1e-12);
    }
}
