//! Distributionally robust estimation on SPD matrices.
//!
//! The upper variable is a weight vector `p` on the probability simplex,
//! the lower variable `y ∈ SPD(d)` minimizes the weighted loss:
//!
//! * lower: `g(p, y) = Σ p_i ℓ_i(y)`
//! * upper: `f(p, y) = ||p - 1/n||² - Σ p_i ℓ_i(y)`
//!
//! with either the squared geodesic distance to SPD samples (Karcher mean)
//! or the Gaussian negative log-likelihood of vector samples. Because
//! `grad_y f = -grad_y g`, the linear-system solution vanishes at `y*` and the
//! exact hypergradient is `grad_p f(p, y*)`.

use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gaussian;
use crate::error::{Error, Result};
use crate::linalg::{spd_eig, spd_inv, spd_logdet, spd_sqrt_pair, sym, Mat, SymEig};
use crate::manifold::{Geometry, Manifold, Point, Simplex, Spd, Tangent};
use crate::problem::BilevelProblem;

const KARCHER_TOL: f64 = 1e-10;
const KARCHER_MAX_ITERS: usize = 10_000;
const MAX_REGENERATIONS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    KarcherMean,
    GaussianMle,
}

#[derive(Debug)]
enum Samples {
    /// SPD matrices.
    Spd(Vec<Mat>),
    /// Outer products `ξ ξ^T` of the vector samples.
    Outer(Vec<Mat>),
}

#[derive(Debug)]
pub struct Robust {
    mx: Geometry,
    my: Geometry,
    kind: LossKind,
    samples: Samples,
    cache: Mutex<Option<Arc<KmCache>>>,
}

/// Per-`y` quantities for the Karcher-mean loss.
#[derive(Debug)]
struct KmCache {
    y: Mat,
    ys: Mat,
    yis: Mat,
    /// Eigendecompositions of `log(y^{-1/2} ξ_i y^{-1/2})`.
    logs: Vec<SymEig>,
}

pub fn make_robust(kind: LossKind, n: usize, d: usize, seed: u64) -> Result<Robust> {
    if n < 2 || d < 1 {
        return Err(Error::Config(format!("robust problem needs n >= 2 and d >= 1, got n={n} d={d}")));
    }
    let samples = match kind {
        LossKind::KarcherMean => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Samples::Spd((0..n).map(|_| Spd::random_with_spectrum(d, 0.1, 10.0, &mut rng)).collect())
        }
        LossKind::GaussianMle => {
            let mut attempt = 0;
            loop {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
                let cov = Spd::random_with_spectrum(d, 0.1, 10.0, &mut rng);
                let (cs, _) = spd_sqrt_pair(&cov)?;
                let outer: Vec<Mat> = (0..n)
                    .map(|_| {
                        let xi = &cs * gaussian(d, 1, &mut rng);
                        &xi * xi.transpose()
                    })
                    .collect();
                let mean = outer.iter().fold(Mat::zeros(d, d), |acc, o| acc + o) / n as f64;
                if spd_eig(&mean).map(|e| e.min() > 1e-10 * e.max()).unwrap_or(false) {
                    break Samples::Outer(outer);
                }
                attempt += 1;
                if attempt >= MAX_REGENERATIONS {
                    return Err(Error::Degenerate(format!(
                        "sample second moment is singular (n={n} < d={d}?)"
                    )));
                }
                log::warn!("singular sample second moment for seed {seed}; regenerating (attempt {attempt})");
            }
        }
    };
    Ok(Robust {
        mx: Arc::new(Simplex::new(n)),
        my: Arc::new(Spd::new(d)),
        kind,
        samples,
        cache: Mutex::new(None),
    })
}

/// Weighted Karcher mean by the fixed-point iteration
/// `y <- Exp_y(Σ p_i Log_y ξ_i)`, run until the Riemannian gradient norm of
/// `Σ p_i d²(y, ξ_i)` is at most `1e-10`.
pub fn karcher_mean(p: &[f64], samples: &[Mat]) -> Result<Mat> {
    let d = samples[0].nrows();
    let m = Spd::new(d);
    let mut y = samples
        .iter()
        .zip(p)
        .fold(Mat::zeros(d, d), |acc, (s, w)| acc + s * *w);
    for _ in 0..KARCHER_MAX_ITERS {
        let (ys, yis) = spd_sqrt_pair(&y)?;
        let mut step = Mat::zeros(d, d);
        for (s, w) in samples.iter().zip(p) {
            step += spd_eig(&sym(&(&yis * s * &yis)))?.map(f64::ln) * *w;
        }
        // whitened step; its Frobenius norm is the Riemannian norm
        if 2.0 * step.norm() <= KARCHER_TOL {
            return Ok(y);
        }
        let u = sym(&(&ys * step * &ys));
        y = m.exp_map(&y, &u)?;
    }
    Err(Error::Tolerance("Karcher mean iteration did not converge".into()))
}

impl Robust {
    pub fn loss_kind(&self) -> LossKind {
        self.kind
    }

    fn weights<'a>(&self, x: &'a Point) -> &'a [f64] {
        x.coords().as_slice()
    }

    fn km(&self, y: &Point) -> Result<Arc<KmCache>> {
        let Samples::Spd(samples) = &self.samples else {
            unreachable!("Karcher cache on vector samples")
        };
        let mut slot = self.cache.lock().expect("robust cache poisoned");
        if let Some(c) = slot.as_ref() {
            if &c.y == y.coords() {
                return Ok(c.clone());
            }
        }
        let (ys, yis) = spd_sqrt_pair(y.coords())?;
        let logs = samples
            .iter()
            .map(|s| {
                let w = spd_eig(&sym(&(&yis * s * &yis)))?;
                Ok(SymEig {
                    values: w.values.map(f64::ln),
                    vectors: w.vectors,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let c = Arc::new(KmCache {
            y: y.coords().clone(),
            ys,
            yis,
            logs,
        });
        *slot = Some(c.clone());
        Ok(c)
    }

    /// Per-sample losses `ℓ_i(y)`.
    fn losses(&self, y: &Point) -> Result<Vec<f64>> {
        match &self.samples {
            Samples::Spd(_) => {
                let c = self.km(y)?;
                Ok(c.logs.iter().map(|e| e.values.norm_squared()).collect())
            }
            Samples::Outer(outer) => {
                let yi = spd_inv(y.coords())?;
                let half_logdet = 0.5 * spd_logdet(y.coords())?;
                Ok(outer.iter().map(|o| half_logdet + 0.5 * yi.dot(o)).collect())
            }
        }
    }

    /// `e_i = <grad ℓ_i(y), v>_y`.
    fn directional(&self, y: &Point, v: &Tangent) -> Result<Vec<f64>> {
        match &self.samples {
            Samples::Spd(_) => {
                let c = self.km(y)?;
                let vt = &c.yis * v.coords() * &c.yis;
                Ok(c.logs.iter().map(|e| -2.0 * e.map(|l| l).dot(&vt)).collect())
            }
            Samples::Outer(outer) => {
                let yi = spd_inv(y.coords())?;
                let w = &yi * v.coords() * &yi;
                let tr = yi.dot(v.coords());
                Ok(outer.iter().map(|o| 0.5 * (tr - w.dot(o))).collect())
            }
        }
    }

    fn second_moment(&self, p: &[f64]) -> Mat {
        let Samples::Outer(outer) = &self.samples else {
            unreachable!("second moment of SPD samples")
        };
        let d = outer[0].nrows();
        sym(&outer.iter().zip(p).fold(Mat::zeros(d, d), |acc, (o, w)| acc + o * *w))
    }

    fn centered(&self, x: &Point, e: &[f64]) -> Result<Tangent> {
        self.mx.egrad_to_rgrad(x, &Mat::from_column_slice(e.len(), 1, e))
    }
}

impl BilevelProblem for Robust {
    fn name(&self) -> &str {
        match self.kind {
            LossKind::KarcherMean => "robust_karcher_mean",
            LossKind::GaussianMle => "robust_gaussian_mle",
        }
    }

    fn upper(&self) -> &Geometry {
        &self.mx
    }

    fn lower(&self) -> &Geometry {
        &self.my
    }

    fn initial_point(&self) -> (Point, Point) {
        let n = self.mx.shape().0;
        let d = self.my.shape().0;
        (
            Point::new_unchecked(self.mx.id(), Mat::from_element(n, 1, 1.0 / n as f64)),
            Point::new_unchecked(self.my.id(), Mat::identity(d, d)),
        )
    }

    fn f(&self, x: &Point, y: &Point) -> Result<f64> {
        let n = self.mx.shape().0 as f64;
        let spread = x.coords().map(|p| p - 1.0 / n).norm_squared();
        Ok(spread - self.g(x, y)?)
    }

    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(self.losses(y)?.iter().zip(self.weights(x)).map(|(l, p)| l * p).sum())
    }

    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let n = self.mx.shape().0 as f64;
        let l = self.losses(y)?;
        let e: Vec<f64> = self
            .weights(x)
            .iter()
            .zip(&l)
            .map(|(p, li)| 2.0 * (p - 1.0 / n) - li)
            .collect();
        self.centered(x, &e)
    }

    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(self.grad_g_y(x, y)?.scale(-1.0))
    }

    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let p = self.weights(x);
        match &self.samples {
            Samples::Spd(_) => {
                let c = self.km(y)?;
                let d = c.ys.nrows();
                let lsum = c
                    .logs
                    .iter()
                    .zip(p)
                    .fold(Mat::zeros(d, d), |acc, (e, w)| acc + e.map(|l| l) * *w);
                Ok(Tangent::new(y, sym(&(&c.ys * lsum * &c.ys)) * -2.0))
            }
            Samples::Outer(_) => {
                let s = self.second_moment(p);
                let total: f64 = p.iter().sum();
                Ok(Tangent::new(y, (y.coords() * total - s) * 0.5))
            }
        }
    }

    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.centered(x, &self.losses(y)?)
    }

    fn hess_g_y_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        let p = self.weights(x);
        match &self.samples {
            Samples::Spd(_) => {
                let c = self.km(y)?;
                let d = c.ys.nrows();
                let vt = &c.yis * v.coords() * &c.yis;
                let mut acc = Mat::zeros(d, d);
                for (e, w) in c.logs.iter().zip(p) {
                    let q = &e.vectors;
                    let mut inner = q.transpose() * &vt * q;
                    for i in 0..d {
                        for j in 0..d {
                            let s = 0.5 * (e.values[i] - e.values[j]).abs();
                            inner[(i, j)] *= if s < 1e-8 { 1.0 + s * s / 3.0 } else { s / s.tanh() };
                        }
                    }
                    acc += q * inner * q.transpose() * (2.0 * w);
                }
                Ok(Tangent::new(y, sym(&(&c.ys * acc * &c.ys))))
            }
            Samples::Outer(_) => {
                let s = self.second_moment(p);
                let yi = spd_inv(y.coords())?;
                let t = v.coords() * &yi * &s;
                Ok(Tangent::new(y, sym(&t) * 0.5))
            }
        }
    }

    /// `p ⊙ (e - p^T e)` with `e_i = <grad ℓ_i, v>_y`.
    fn cross_g_xy_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        self.centered(x, &self.directional(y, v)?)
    }

    fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
        let p = self.weights(x);
        let y = match &self.samples {
            Samples::Spd(s) => karcher_mean(p, s),
            Samples::Outer(_) => Ok(self.second_moment(p)),
        };
        Some(y.map(|y| Point::new_unchecked(self.my.id(), y)))
    }

    fn exact_hypergradient(&self, x: &Point) -> Option<Result<Tangent>> {
        Some(
            self.lower_closed_form(x)
                .expect("robust problems have a lower oracle")
                .and_then(|y| self.grad_f_x(x, &y)),
        )
    }
}
