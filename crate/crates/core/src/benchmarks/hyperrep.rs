//! Shallow hyper-representation for regression on SPD inputs.
//!
//! The upper variable `A ∈ St(d, r)` maps each SPD sample to features
//! `φ_i(A) = triu(log(A^T D_i A))`; the lower level is ridge regression of
//! the targets on those features:
//!
//! * lower: `g(A, β) = 1/(2 m_tr) Σ_tr (φ_i β - y_i)² + λ/2 ||β||²`
//! * upper: `f(A, β) = 1/(2 m_val) Σ_val (φ_i β - y_i)²`
//!
//! `φ_i β = <L_i, G(β)>` where `G(β)` is the symmetric matrix with `β` on
//! the diagonal and `β/2` off it, so derivatives in `A` go through the
//! Fréchet derivative of the matrix logarithm.

use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gaussian;
use crate::error::{Error, Result};
use crate::linalg::{spd_eig, sym, Mat, SymEig};
use crate::manifold::{Euclidean, Geometry, Manifold, Point, Spd, Stiefel, Tangent};
use crate::problem::BilevelProblem;

#[derive(Debug)]
pub struct ShallowHyperRep {
    mx: Geometry,
    my: Geometry,
    r: usize,
    lambda: f64,
    samples: Vec<Mat>,
    targets: Vec<f64>,
    n_train: usize,
    a0: Mat,
    cache: Mutex<Option<Arc<Features>>>,
}

/// Everything that depends on `A` alone.
#[derive(Debug)]
struct Features {
    a: Mat,
    /// `D_i A`.
    da: Vec<Mat>,
    eig: Vec<SymEig>,
    /// Rows `φ_i`.
    phi: Mat,
}

pub fn make_shallow_hyperrep(
    n: usize,
    d: usize,
    r: usize,
    lambda: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<ShallowHyperRep> {
    if !(d >= r && r >= 1) {
        return Err(Error::Config(format!("hyper-representation needs d >= r >= 1, got d={d} r={r}")));
    }
    if n < 2 {
        return Err(Error::Config("hyper-representation needs at least two samples".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!(
            "lambda must be positive for a well-posed ridge lower level, got {lambda}"
        )));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::Config(format!("noise_sd must be non-negative, got {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let st = Stiefel::new(d, r);
    let samples: Vec<Mat> = (0..n).map(|_| Spd::random_with_spectrum(d, 0.1, 10.0, &mut rng)).collect();
    let a_true = st.random_point(&mut rng);
    let q = r * (r + 1) / 2;
    let beta_true = gaussian(q, 1, &mut rng);
    let noise = gaussian(n, 1, &mut rng);
    let a0 = st.random_point(&mut rng);
    let mut targets = Vec::with_capacity(n);
    for (i, s) in samples.iter().enumerate() {
        let l = spd_eig(&sym(&(a_true.transpose() * s * &a_true)))?.map(f64::ln);
        let phi = triu(&l);
        targets.push(phi.dot(&beta_true) + noise_sd * noise[i]);
    }
    Ok(ShallowHyperRep {
        mx: Arc::new(st),
        my: Arc::new(Euclidean::vector(q)),
        r,
        lambda,
        samples,
        targets,
        n_train: n / 2,
        a0,
        cache: Mutex::new(None),
    })
}

/// Upper-triangular entries, row by row.
fn triu(l: &Mat) -> Mat {
    let r = l.nrows();
    let mut out = Vec::with_capacity(r * (r + 1) / 2);
    for i in 0..r {
        for j in i..r {
            out.push(l[(i, j)]);
        }
    }
    Mat::from_vec(out.len(), 1, out)
}

impl ShallowHyperRep {
    /// Symmetric `G` with `φ(L) · β = <L, G>`.
    fn gmat(&self, beta: &Mat) -> Mat {
        let r = self.r;
        let mut g = Mat::zeros(r, r);
        let mut k = 0;
        for i in 0..r {
            for j in i..r {
                if i == j {
                    g[(i, i)] = beta[k];
                } else {
                    g[(i, j)] = 0.5 * beta[k];
                    g[(j, i)] = 0.5 * beta[k];
                }
                k += 1;
            }
        }
        g
    }

    fn features(&self, x: &Point) -> Result<Arc<Features>> {
        let mut slot = self.cache.lock().expect("feature cache poisoned");
        if let Some(f) = slot.as_ref() {
            if &f.a == x.coords() {
                return Ok(f.clone());
            }
        }
        let a = x.coords();
        let q = self.r * (self.r + 1) / 2;
        let mut phi = Mat::zeros(self.samples.len(), q);
        let mut da = Vec::with_capacity(self.samples.len());
        let mut eig = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            let sa = s * a;
            let e = spd_eig(&sym(&(a.transpose() * &sa)))?;
            phi.row_mut(i).copy_from(&triu(&e.map(f64::ln)).transpose());
            da.push(sa);
            eig.push(e);
        }
        let f = Arc::new(Features {
            a: a.clone(),
            da,
            eig,
            phi,
        });
        *slot = Some(f.clone());
        Ok(f)
    }

    fn split(&self, train: bool) -> std::ops::Range<usize> {
        if train {
            0..self.n_train
        } else {
            self.n_train..self.samples.len()
        }
    }

    /// `φ_i β - y_i` over a split.
    fn residuals(&self, f: &Features, beta: &Mat, train: bool) -> Vec<f64> {
        self.split(train)
            .map(|i| f.phi.row(i).dot(&beta.transpose()) - self.targets[i])
            .collect()
    }

    /// Euclidean gradient in `A` of `Σ_i <log(A^T D_i A), K_i>` over a split.
    fn egrad_a(&self, f: &Features, train: bool, k: impl Fn(usize, usize) -> Mat) -> Mat {
        let mut out = Mat::zeros(f.a.nrows(), f.a.ncols());
        for (j, i) in self.split(train).enumerate() {
            let ki = k(i, j);
            let dl = f.eig[i].frechet(&ki, f64::ln, |w| 1.0 / w);
            out += &f.da[i] * dl * 2.0;
        }
        out
    }

    fn m(&self, train: bool) -> f64 {
        self.split(train).len() as f64
    }

    fn rows(&self, f: &Features, train: bool) -> Mat {
        let r = self.split(train);
        f.phi.rows(r.start, r.len()).into_owned()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }
}

impl BilevelProblem for ShallowHyperRep {
    fn name(&self) -> &str {
        "shallow_hyperrep"
    }

    fn upper(&self) -> &Geometry {
        &self.mx
    }

    fn lower(&self) -> &Geometry {
        &self.my
    }

    fn initial_point(&self) -> (Point, Point) {
        let q = self.r * (self.r + 1) / 2;
        (
            Point::new_unchecked(self.mx.id(), self.a0.clone()),
            Point::new_unchecked(self.my.id(), Mat::zeros(q, 1)),
        )
    }

    fn f(&self, x: &Point, y: &Point) -> Result<f64> {
        let f = self.features(x)?;
        let r = self.residuals(&f, y.coords(), false);
        Ok(r.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.m(false)))
    }

    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        let f = self.features(x)?;
        let r = self.residuals(&f, y.coords(), true);
        Ok(r.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.m(true))
            + 0.5 * self.lambda * y.coords().norm_squared())
    }

    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let f = self.features(x)?;
        let res = self.residuals(&f, y.coords(), false);
        let gb = self.gmat(y.coords());
        let m = self.m(false);
        let e = self.egrad_a(&f, false, |_, j| &gb * (res[j] / m));
        self.mx.egrad_to_rgrad(x, &e)
    }

    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let f = self.features(x)?;
        let res = Mat::from_vec(self.split(false).len(), 1, self.residuals(&f, y.coords(), false));
        Ok(Tangent::new(y, self.rows(&f, false).transpose() * res / self.m(false)))
    }

    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let f = self.features(x)?;
        let res = Mat::from_vec(self.n_train, 1, self.residuals(&f, y.coords(), true));
        let g = self.rows(&f, true).transpose() * res / self.m(true) + y.coords() * self.lambda;
        Ok(Tangent::new(y, g))
    }

    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let f = self.features(x)?;
        let res = self.residuals(&f, y.coords(), true);
        let gb = self.gmat(y.coords());
        let m = self.m(true);
        let e = self.egrad_a(&f, true, |_, j| &gb * (res[j] / m));
        self.mx.egrad_to_rgrad(x, &e)
    }

    fn hess_g_y_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        let f = self.features(x)?;
        let phi = self.rows(&f, true);
        let h = phi.transpose() * (&phi * v.coords()) / self.m(true) + v.coords() * self.lambda;
        Ok(Tangent::new(y, h))
    }

    /// `proj (1/m) Σ 2 D_i A Dlog[(φ_i v) G(β) + r_i G(v)]`.
    fn cross_g_xy_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        let f = self.features(x)?;
        let res = self.residuals(&f, y.coords(), true);
        let gb = self.gmat(y.coords());
        let gv = self.gmat(v.coords());
        let m = self.m(true);
        let e = self.egrad_a(&f, true, |i, j| {
            let pv = f.phi.row(i).dot(&v.coords().transpose());
            (&gb * pv + &gv * res[j]) / m
        });
        self.mx.egrad_to_rgrad(x, &e)
    }

    /// Ridge normal equations `(Φ^T Φ / m + λ I) β = Φ^T y / m`.
    fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
        Some((|| {
            let f = self.features(x)?;
            let phi = self.rows(&f, true);
            let m = self.m(true);
            let q = phi.ncols();
            let h = phi.transpose() * &phi / m + Mat::identity(q, q) * self.lambda;
            let ys = Mat::from_column_slice(self.n_train, 1, &self.targets[..self.n_train]);
            let rhs = phi.transpose() * ys / m;
            let chol = nalgebra::Cholesky::new(h)
                .ok_or_else(|| Error::Degenerate("ridge Gram matrix is not positive definite".into()))?;
            Ok(Point::new_unchecked(self.my.id(), chol.solve(&rhs)))
        })())
    }
}
