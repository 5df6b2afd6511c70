//! Open probability simplex with the Fisher metric `sum u_i v_i / p_i`.
//!
//! The chart `p -> 2 sqrt(p)` is an isometry onto the positive orthant of
//! the radius-2 sphere, which supplies closed-form exp, log and parallel
//! transport.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::Manifold;
use crate::error::{Error, Result};
use crate::linalg::Mat;

const RADIUS: f64 = 2.0;
const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Simplex {
    n: usize,
    id: String,
}

impl Simplex {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "simplex needs at least two entries");
        Self {
            n,
            id: format!("simplex({n})"),
        }
    }

    pub fn uniform(&self) -> Mat {
        Mat::from_element(self.n, 1, 1.0 / self.n as f64)
    }

    fn to_sphere(p: &Mat) -> Mat {
        p.map(|v| RADIUS * v.max(0.0).sqrt())
    }

    fn from_sphere(s: &Mat) -> Mat {
        let mut p = s.map(|v| (v * v / (RADIUS * RADIUS)).max(FLOOR));
        let total = p.sum();
        p /= total;
        p
    }

    /// Tangent at `p` to sphere-chart velocity.
    fn lift(p: &Mat, u: &Mat) -> Mat {
        u.zip_map(p, |ui, pi| ui / pi.sqrt())
    }

    fn lower(p: &Mat, sdot: &Mat) -> Mat {
        let mut u = sdot.zip_map(p, |si, pi| si * pi.sqrt());
        // remove rounding drift off the tangent space
        let drift = u.sum();
        u -= p * drift;
        u
    }
}

impl Manifold for Simplex {
    fn id(&self) -> &str {
        &self.id
    }

    fn shape(&self) -> (usize, usize) {
        (self.n, 1)
    }

    fn dim(&self) -> usize {
        self.n - 1
    }

    fn validate_point(&self, x: &Mat) -> Result<()> {
        if x.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotOnManifold {
                manifold: self.id.clone(),
                reason: "entries must be positive".into(),
            });
        }
        let s = x.sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::NotOnManifold {
                manifold: self.id.clone(),
                reason: format!("entries sum to {s}"),
            });
        }
        Ok(())
    }

    fn validate_tangent(&self, _x: &Mat, u: &Mat) -> Result<()> {
        let s = u.sum();
        if !(s.abs() <= 1e-12 * u.abs().sum().max(1.0)) {
            return Err(Error::NotOnManifold {
                manifold: format!("T {}", self.id),
                reason: format!("tangent entries sum to {s:e}"),
            });
        }
        Ok(())
    }

    fn metric(&self, x: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.iter().zip(v.iter()).zip(x.iter()).map(|((a, b), p)| a * b / p).sum()
    }

    fn exp_map(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let s = Self::to_sphere(x);
        let sdot = Self::lift(x, u);
        let speed = sdot.norm();
        if !speed.is_finite() {
            return Err(Error::NonFinite("simplex exp".into()));
        }
        if speed == 0.0 {
            return Ok(x.clone());
        }
        let theta = speed / RADIUS;
        let s1 = &s * theta.cos() + &sdot * (RADIUS * theta.sin() / speed);
        Ok(Self::from_sphere(&s1))
    }

    fn log_map(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        let s = Self::to_sphere(x);
        let s1 = Self::to_sphere(y);
        let c = s.dot(&s1) / (RADIUS * RADIUS);
        let w = &s1 - &s * c;
        let wn = w.norm();
        let theta = (wn / RADIUS).atan2(c);
        if theta >= std::f64::consts::PI - 1e-8 {
            return Err(Error::Domain("antipodal points in the sphere chart".into()));
        }
        if wn == 0.0 {
            return Ok(Mat::zeros(self.n, 1));
        }
        let sdot = w * (RADIUS * theta / wn);
        Ok(Self::lower(x, &sdot))
    }

    /// `p ⊙ exp(u / p)`, renormalized.
    fn retraction(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        let z: Vec<f64> = x.iter().zip(u.iter()).map(|(p, ui)| p.ln() + ui / p).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simplex retraction".into()));
        }
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p = Mat::from_iterator(self.n, 1, z.iter().map(|v| (v - zmax).exp().max(FLOOR)));
        let total = p.sum();
        p /= total;
        Ok(p)
    }

    fn vector_transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        let s = Self::to_sphere(from);
        let s1 = Self::to_sphere(to);
        let xi = Self::lift(from, u);
        let denom = RADIUS * RADIUS + s.dot(&s1);
        if denom <= 1e-12 {
            return Err(Error::Domain("transport between antipodal points".into()));
        }
        let coef = s1.dot(&xi) / denom;
        let moved = &xi - (&s + &s1) * coef;
        Ok(Self::lower(to, &moved))
    }

    fn dist(&self, x: &Mat, y: &Mat) -> Result<f64> {
        let s = Self::to_sphere(x);
        let s1 = Self::to_sphere(y);
        let c = s.dot(&s1) / (RADIUS * RADIUS);
        let wn = (&s1 - &s * c).norm();
        Ok(RADIUS * (wn / RADIUS).atan2(c))
    }

    /// Geodesic distance in the sphere chart to the nearest face.
    fn exp_radius(&self, x: &Mat) -> f64 {
        x.iter().map(|p| RADIUS * p.max(0.0).sqrt().min(1.0).asin()).fold(f64::INFINITY, f64::min)
    }

    fn euclidean_to_riemannian(&self, x: &Mat, egrad: &Mat) -> Mat {
        let mean = x.dot(egrad);
        egrad.zip_map(x, |g, p| p * (g - mean))
    }

    fn project_tangent(&self, x: &Mat, u: &Mat) -> Mat {
        u - x * u.sum()
    }

    fn project_point(&self, x: &Mat) -> Result<Mat> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("simplex point".into()));
        }
        let mut p = x.map(|v| v.max(FLOOR));
        let total = p.sum();
        p /= total;
        Ok(p)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Mat {
        let mut p = Mat::from_fn(self.n, 1, |_, _| {
            let g: f64 = StandardNormal.sample(&mut *rng);
            (0.5 * g).exp()
        });
        let total = p.sum();
        p /= total;
        p
    }

    fn random_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let g = Mat::from_fn(self.n, 1, |i, _| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            z * x[(i, 0)].sqrt()
        });
        self.project_tangent(x, &g)
    }

    fn isometric_transport(&self) -> bool {
        true
    }

    fn curvature_lower_bound(&self) -> Option<f64> {
        Some(1.0 / (RADIUS * RADIUS))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Tangent;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn v(xs: &[f64]) -> Mat {
        Mat::from_column_slice(xs.len(), 1, xs)
    }

    #[test]
    fn distance_is_fisher_rao() {
        let m = Simplex::new(3);
        let p = m.point(v(&[0.2, 0.3, 0.5])).unwrap();
        let q = m.point(v(&[0.6, 0.3, 0.1])).unwrap();
        let bc: f64 = [0.2f64 * 0.6, 0.3 * 0.3, 0.5 * 0.1].iter().map(|a| a.sqrt()).sum();
        assert_relative_eq!(m.distance(&p, &q).unwrap(), 2.0 * bc.acos(), epsilon = 1e-12);
        assert_relative_eq!(m.log(&p, &q).unwrap().coords().sum(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn exp_log_roundtrip_and_invariants() {
        let m = Simplex::new(6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let x = m.sample_point(&mut rng);
            let u = m.sample_tangent(&x, &mut rng);
            let u = u.scale(0.3 / m.norm(&u));
            let y = m.exp(&x, &u).unwrap();
            m.validate_point(y.coords()).unwrap();
            let back = m.log(&x, &y).unwrap();
            assert!((back.coords() - u.coords()).norm() < 1e-10);
            assert_relative_eq!(m.distance(&x, &y).unwrap(), 0.3, epsilon = 1e-10);
        }
    }

    #[test]
    fn rgrad_is_tangent_and_represents_derivative() {
        let m = Simplex::new(4);
        let x = m.point(v(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let eg = v(&[1.0, -2.0, 0.5, 3.0]);
        let rg = m.egrad_to_rgrad(&x, &eg).unwrap();
        assert_relative_eq!(rg.coords().sum(), 0.0, epsilon = 1e-15);
        let u = Tangent::new(&x, v(&[0.1, -0.3, 0.15, 0.05]));
        assert_relative_eq!(m.inner(&x, &rg, &u).unwrap(), eg.dot(u.coords()), epsilon = 1e-14);
    }

    #[test]
    fn retraction_stays_normalized() {
        let m = Simplex::new(3);
        let x = m.point(v(&[0.2, 0.3, 0.5])).unwrap();
        let u = Tangent::new(&x, v(&[5.0, -1.0, -4.0]));
        let y = m.retract(&x, &u).unwrap();
        m.validate_point(y.coords()).unwrap();
    }
}
