//! Stiefel manifold `St(n, p)` of `n × p` matrices with orthonormal columns,
//! embedded metric `tr(U^T V)`, QR retraction and projection transport.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::Manifold;
use crate::error::{Error, Result};
use crate::linalg::{qf, sym, Mat};

const LOG_MAX_ITERS: usize = 500;

#[derive(Debug, Clone)]
pub struct Stiefel {
    n: usize,
    p: usize,
    id: String,
}

impl Stiefel {
    pub fn new(n: usize, p: usize) -> Self {
        assert!(n >= p && p >= 1, "Stiefel manifold needs n >= p >= 1");
        Self {
            n,
            p,
            id: format!("stiefel({n},{p})"),
        }
    }

    fn proj(x: &Mat, u: &Mat) -> Mat {
        u - x * sym(&(x.transpose() * u))
    }
}

impl Manifold for Stiefel {
    fn id(&self) -> &str {
        &self.id
    }

    fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn dim(&self) -> usize {
        self.n * self.p - self.p * (self.p + 1) / 2
    }

    fn validate_point(&self, x: &Mat) -> Result<()> {
        let err = (x.transpose() * x - Mat::identity(self.p, self.p)).norm();
        if !(err <= 1e-10) {
            return Err(Error::NotOnManifold {
                manifold: self.id.clone(),
                reason: format!("||W^T W - I||_F = {err:e}"),
            });
        }
        Ok(())
    }

    fn validate_tangent(&self, x: &Mat, u: &Mat) -> Result<()> {
        let a = x.transpose() * u;
        let err = (&a + a.transpose()).norm();
        if !(err <= 1e-10 * u.norm().max(1.0)) {
            return Err(Error::NotOnManifold {
                manifold: format!("T {}", self.id),
                reason: format!("||W^T U + U^T W||_F = {err:e}"),
            });
        }
        Ok(())
    }

    fn metric(&self, _x: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.dot(v)
    }

    /// Geodesic of the embedded metric:
    /// `[W U] expm([[A, -S], [I, A]]) [I; 0] expm(-A)` with `A = W^T U`, `S = U^T U`.
    fn exp_map(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let p = self.p;
        let a = x.transpose() * u;
        let s = u.transpose() * u;
        let mut block = Mat::zeros(2 * p, 2 * p);
        block.view_mut((0, 0), (p, p)).copy_from(&a);
        block.view_mut((0, p), (p, p)).copy_from(&(-&s));
        block.view_mut((p, 0), (p, p)).copy_from(&Mat::identity(p, p));
        block.view_mut((p, p), (p, p)).copy_from(&a);
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("stiefel exp".into()));
        }
        let e = block.exp();
        let mut wu = Mat::zeros(self.n, 2 * p);
        wu.view_mut((0, 0), (self.n, p)).copy_from(x);
        wu.view_mut((0, p), (self.n, p)).copy_from(u);
        let y = wu * e.columns(0, p) * (-a).exp();
        Ok(y)
    }

    /// Inverse of [`Self::exp_map`] by fixed-point shooting: the tangent
    /// guess is corrected with the projected endpoint mismatch until the
    /// geodesic lands on `y`.
    fn log_map(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        let mut u = Self::proj(x, &(y - x));
        let scale = y.norm().max(1.0);
        let mut last = f64::INFINITY;
        for _ in 0..LOG_MAX_ITERS {
            let miss = y - self.exp_map(x, &u)?;
            let err = miss.norm();
            if err <= 1e-14 * scale {
                return Ok(u);
            }
            if !err.is_finite() || err > 10.0 * last.min(scale) {
                break;
            }
            last = err;
            u += Self::proj(x, &miss);
        }
        if last <= 1e-11 * scale {
            return Ok(u);
        }
        Err(Error::Domain(format!(
            "stiefel log did not converge (residual {last:e}); points too far apart"
        )))
    }

    fn retraction(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        qf(&(x + u))
    }

    fn vector_transport(&self, _from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        Ok(Self::proj(to, u))
    }

    fn euclidean_to_riemannian(&self, x: &Mat, egrad: &Mat) -> Mat {
        Self::proj(x, egrad)
    }

    fn project_tangent(&self, x: &Mat, u: &Mat) -> Mat {
        Self::proj(x, u)
    }

    fn project_point(&self, x: &Mat) -> Result<Mat> {
        qf(x)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Mat {
        loop {
            let g = Mat::from_fn(self.n, self.p, |_, _| StandardNormal.sample(&mut *rng));
            if let Ok(q) = qf(&g) {
                return q;
            }
        }
    }

    fn random_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let g = Mat::from_fn(self.n, self.p, |_, _| StandardNormal.sample(&mut *rng));
        Self::proj(x, &g)
    }

    fn isometric_transport(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Tangent;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn qr_retraction_on_column() {
        let m = Stiefel::new(2, 1);
        let w = m.point(Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        for t in [0.1, 0.5, 2.0] {
            let u = m.tangent(&w, Mat::from_column_slice(2, 1, &[0.0, t])).unwrap();
            let r = m.retract(&w, &u).unwrap();
            let s = (1.0 + t * t).sqrt();
            assert_relative_eq!(r.coords(), &Mat::from_column_slice(2, 1, &[1.0 / s, t / s]), epsilon = 1e-14);
        }
    }

    #[test]
    fn exp_on_circle_is_rotation() {
        let m = Stiefel::new(2, 1);
        let w = m.point(Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let u = Tangent::new(&w, Mat::from_column_slice(2, 1, &[0.0, 0.7]));
        let y = m.exp(&w, &u).unwrap();
        assert_relative_eq!(y.coords(), &Mat::from_column_slice(2, 1, &[0.7f64.cos(), 0.7f64.sin()]), epsilon = 1e-13);
        assert_relative_eq!(m.log(&w, &y).unwrap().coords(), u.coords(), epsilon = 1e-11);
    }

    #[test]
    fn exp_log_roundtrip_random() {
        let m = Stiefel::new(8, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = m.sample_point(&mut rng);
            let mut u = m.sample_tangent(&x, &mut rng);
            let n = m.norm(&u);
            u = u.scale(0.5 / n);
            let y = m.exp(&x, &u).unwrap();
            m.validate_point(y.coords()).unwrap();
            let back = m.log(&x, &y).unwrap();
            assert!((back.coords() - u.coords()).norm() < 1e-9);
        }
    }

    #[test]
    fn projection_is_idempotent_on_tangents() {
        let m = Stiefel::new(5, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = m.sample_point(&mut rng);
        let u = m.sample_tangent(&x, &mut rng);
        let rg = m.egrad_to_rgrad(&x, u.coords()).unwrap();
        assert_relative_eq!(rg.coords(), u.coords(), epsilon = 1e-14);
        m.validate_tangent(x.coords(), u.coords()).unwrap();
    }

    #[test]
    fn rank_deficient_retraction_fails() {
        let m = Stiefel::new(2, 1);
        let w = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let u = Mat::from_column_slice(2, 1, &[-1.0, 0.0]);
        assert!(matches!(m.retraction(&w, &u), Err(Error::Degenerate(_))));
    }
}
