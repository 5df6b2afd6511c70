//! Symmetric positive definite matrices with the affine-invariant metric
//! `<U, V>_X = tr(X^{-1} U X^{-1} V)`.
//!
//! This is a Hadamard manifold with sectional curvature in `[-1/2, 0]`, so
//! exp, log and parallel transport all have closed forms.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::Manifold;
use crate::error::{Error, Result};
use crate::linalg::{qf, spd_eig, spd_inv, spd_sqrt_pair, sym, Mat, SymEig};

#[derive(Debug, Clone)]
pub struct Spd {
    n: usize,
    id: String,
}

impl Spd {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            id: format!("spd({n})"),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Random SPD matrix `Q diag(w) Q^T` with `log w` uniform on `[ln lo, ln hi]`.
    pub fn random_with_spectrum(n: usize, lo: f64, hi: f64, rng: &mut dyn RngCore) -> Mat {
        let g = Mat::from_fn(n, n, |_, _| StandardNormal.sample(&mut *rng));
        let q = qf(&g).expect("gaussian matrix has full rank");
        let w: Vec<f64> = (0..n)
            .map(|_| rng.random_range(lo.ln()..=hi.ln()).exp())
            .collect();
        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(w));
        sym(&(&q * d * q.transpose()))
    }

    /// `X^{-1/2} Y X^{-1/2}` together with `X^{1/2}`.
    fn whiten(x: &Mat, y: &Mat) -> Result<(Mat, Mat, Mat)> {
        let (xs, xis) = spd_sqrt_pair(x)?;
        let w = &xis * y * &xis;
        Ok((xs, xis, sym(&w)))
    }
}

impl Manifold for Spd {
    fn id(&self) -> &str {
        &self.id
    }

    fn shape(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn validate_point(&self, x: &Mat) -> Result<()> {
        let asym = (x - x.transpose()).amax();
        if asym > 1e-12 * x.amax().max(1.0) {
            return Err(Error::NotOnManifold {
                manifold: self.id.clone(),
                reason: format!("asymmetry {asym:e}"),
            });
        }
        let eig = SymEig::new(x)?;
        if eig.min() <= 0.0 {
            return Err(Error::NotOnManifold {
                manifold: self.id.clone(),
                reason: format!("minimum eigenvalue {:e}", eig.min()),
            });
        }
        Ok(())
    }

    fn validate_tangent(&self, _x: &Mat, u: &Mat) -> Result<()> {
        let asym = (u - u.transpose()).amax();
        if asym > 1e-12 * u.amax().max(1.0) {
            return Err(Error::NotOnManifold {
                manifold: format!("T {}", self.id),
                reason: format!("tangent asymmetry {asym:e}"),
            });
        }
        Ok(())
    }

    fn metric(&self, x: &Mat, u: &Mat, v: &Mat) -> f64 {
        match spd_inv(x) {
            Ok(xi) => (&xi * u).dot(&(v * &xi)),
            Err(_) => f64::NAN,
        }
    }

    fn exp_map(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let (xs, _, w) = Self::whiten(x, u)?;
        let e = SymEig::new(&w)?.map(f64::exp);
        let y = sym(&(&xs * e * &xs));
        spd_eig(&y)?;
        Ok(y)
    }

    fn log_map(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        let (xs, _, w) = Self::whiten(x, y)?;
        let l = spd_eig(&w)?.map(f64::ln);
        Ok(sym(&(&xs * l * &xs)))
    }

    /// Second-order retraction `X + U + U X^{-1} U / 2`, which stays positive definite.
    fn retraction(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let xi = spd_inv(x)?;
        let y = sym(&(x + u + u * &xi * u * 0.5));
        if nalgebra::Cholesky::new(y.clone()).is_none() {
            return Err(Error::Degenerate("retraction left the positive definite cone".into()));
        }
        Ok(y)
    }

    /// Parallel transport `E U E^T` with `E = (Y X^{-1})^{1/2}`.
    fn vector_transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        let (xs, xis, w) = Self::whiten(from, to)?;
        let e = &xs * spd_eig(&w)?.map(f64::sqrt) * &xis;
        Ok(sym(&(&e * u * e.transpose())))
    }

    fn dist(&self, x: &Mat, y: &Mat) -> Result<f64> {
        let (_, _, w) = Self::whiten(x, y)?;
        let eig = spd_eig(&w)?;
        Ok(eig.values.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
    }

    fn euclidean_to_riemannian(&self, x: &Mat, egrad: &Mat) -> Mat {
        sym(&(x * sym(egrad) * x))
    }

    fn project_tangent(&self, _x: &Mat, u: &Mat) -> Mat {
        sym(u)
    }

    fn project_point(&self, x: &Mat) -> Result<Mat> {
        let s = sym(x);
        spd_eig(&s)?;
        Ok(s)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Mat {
        Self::random_with_spectrum(self.n, 0.5, 2.0, rng)
    }

    fn random_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let g = Mat::from_fn(self.n, self.n, |_, _| StandardNormal.sample(&mut *rng));
        // whitened gaussian mapped back, so the direction is isotropic in the metric
        match spd_sqrt_pair(x) {
            Ok((xs, _)) => sym(&(&xs * sym(&g) * &xs)),
            Err(_) => sym(&g),
        }
    }

    fn isometric_transport(&self) -> bool {
        true
    }

    fn curvature_lower_bound(&self) -> Option<f64> {
        Some(-0.5)
    }

    fn tangent_basis(&self, x: &Mat) -> Vec<Mat> {
        let xs = match spd_sqrt_pair(x) {
            Ok((xs, _)) => xs,
            Err(_) => return Vec::new(),
        };
        let n = self.n;
        let mut basis = Vec::with_capacity(self.dim());
        for i in 0..n {
            for j in i..n {
                let mut e = Mat::zeros(n, n);
                if i == j {
                    e[(i, i)] = 1.0;
                } else {
                    e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                    e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
                }
                basis.push(sym(&(&xs * e * &xs)));
            }
        }
        basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Tangent;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn diag(xs: &[f64]) -> Mat {
        Mat::from_diagonal(&nalgebra::DVector::from_row_slice(xs))
    }

    /// Truncated power series, independent of the eigen route.
    fn expm_series(a: &Mat) -> Mat {
        let mut term = Mat::identity(a.nrows(), a.ncols());
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn metric_examples() {
        let m = Spd::new(2);
        let id = m.point(Mat::identity(2, 2)).unwrap();
        let u = Tangent::new(&id, Mat::identity(2, 2));
        assert_relative_eq!(m.inner(&id, &u, &u).unwrap(), 2.0, epsilon = 1e-14);
        let x = m.point(diag(&[2.0, 2.0])).unwrap();
        let u = Tangent::new(&x, Mat::identity(2, 2));
        assert_relative_eq!(m.inner(&x, &u, &u).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn exp_at_identity_matches_series() {
        let m = Spd::new(2);
        let id = m.point(Mat::identity(2, 2)).unwrap();
        let u = Tangent::new(&id, diag(&[1.0, 0.0]));
        let y = m.exp(&id, &u).unwrap();
        assert_relative_eq!(y.coords(), &expm_series(&diag(&[1.0, 0.0])), epsilon = 1e-13);
        assert_relative_eq!(y.coords(), &diag(&[E, 1.0]), epsilon = 1e-13);

        let w = Mat::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 0.1]);
        let u = Tangent::new(&id, w.clone());
        assert_relative_eq!(m.exp(&id, &u).unwrap().coords(), &expm_series(&w), epsilon = 1e-13);
    }

    #[test]
    fn log_inverts_exp_example() {
        let m = Spd::new(2);
        let id = m.point(Mat::identity(2, 2)).unwrap();
        let y = m.point(diag(&[E, 1.0])).unwrap();
        assert_relative_eq!(m.log(&id, &y).unwrap().coords(), &diag(&[1.0, 0.0]), epsilon = 1e-13);
        let ey = m.point(Mat::identity(2, 2) * E).unwrap();
        assert_relative_eq!(m.distance(&id, &ey).unwrap(), 2f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn retraction_example() {
        let m = Spd::new(2);
        let id = m.point(Mat::identity(2, 2)).unwrap();
        let u = Tangent::new(&id, diag(&[0.1, 0.0]));
        assert_relative_eq!(m.retract(&id, &u).unwrap().coords(), &diag(&[1.105, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn transport_identity_to_scaled() {
        let m = Spd::new(2);
        let id = m.point(Mat::identity(2, 2)).unwrap();
        let y = m.point(Mat::identity(2, 2) * 4.0).unwrap();
        let u = Tangent::new(&id, Mat::identity(2, 2));
        let pu = m.transport(&id, &y, &u).unwrap();
        assert_relative_eq!(pu.coords(), &(Mat::identity(2, 2) * 4.0), epsilon = 1e-13);
        assert_relative_eq!(
            m.inner(&y, &pu, &pu).unwrap(),
            m.inner(&id, &u, &u).unwrap(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn rgrad_at_identity_is_sym() {
        let m = Spd::new(2);
        let id = m.point(Mat::identity(2, 2)).unwrap();
        let eg = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        assert_relative_eq!(m.egrad_to_rgrad(&id, &eg).unwrap().coords(), &sym(&eg), epsilon = 1e-15);
    }

    #[test]
    fn basis_is_orthonormal() {
        use rand::SeedableRng;
        let m = Spd::new(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = m.random_point(&mut rng);
        let b = m.tangent_basis(&x);
        assert_eq!(b.len(), 6);
        for i in 0..b.len() {
            for j in 0..b.len() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(m.metric(&x, &b[i], &b[j]), expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let m = Spd::new(2);
        assert!(m.point(diag(&[1.0, -1.0])).is_err());
        assert!(m.point(Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
    }
}
