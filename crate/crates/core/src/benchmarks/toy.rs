//! Euclidean sanity problem `g = ½||y - C x||²`, `f = ½||y||²` with
//! `y* = C x`, `v* = y*` and `∇F = C^T C x`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gaussian;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::{Euclidean, Geometry, Point, Tangent};
use crate::problem::BilevelProblem;

#[derive(Debug, Clone)]
pub struct ToyQuadratic {
    mx: Geometry,
    my: Geometry,
    c: Mat,
    x0: Mat,
}

/// Random `C` (`ny × nx`, standard normal) and `x0`; `y0 = 0`.
pub fn make_toy_quadratic(nx: usize, ny: usize, seed: u64) -> Result<ToyQuadratic> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config("toy quadratic dimensions must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = gaussian(ny, nx, &mut rng);
    let x0 = gaussian(nx, 1, &mut rng);
    ToyQuadratic::new(c, x0)
}

impl ToyQuadratic {
    pub fn new(c: Mat, x0: Mat) -> Result<Self> {
        let (ny, nx) = c.shape();
        if x0.shape() != (nx, 1) {
            return Err(Error::Shape {
                expected: (nx, 1),
                found: x0.shape(),
            });
        }
        Ok(Self {
            mx: Arc::new(Euclidean::vector(nx)),
            my: Arc::new(Euclidean::vector(ny)),
            c,
            x0,
        })
    }

    /// `C = diag(c)`.
    pub fn diagonal(c: &[f64], x0: &[f64]) -> Result<Self> {
        let d = Mat::from_diagonal(&nalgebra::DVector::from_column_slice(c));
        Self::new(d, Mat::from_column_slice(x0.len(), 1, x0))
    }

    pub fn matrix(&self) -> &Mat {
        &self.c
    }

    /// `F(x) = ½||C x||²`.
    pub fn upper_value(&self, x: &Point) -> f64 {
        0.5 * (&self.c * x.coords()).norm_squared()
    }
}

impl BilevelProblem for ToyQuadratic {
    fn name(&self) -> &str {
        "toy_quadratic"
    }

    fn upper(&self) -> &Geometry {
        &self.mx
    }

    fn lower(&self) -> &Geometry {
        &self.my
    }

    fn initial_point(&self) -> (Point, Point) {
        let y0 = Mat::zeros(self.c.nrows(), 1);
        (
            Point::new_unchecked(self.mx.id(), self.x0.clone()),
            Point::new_unchecked(self.my.id(), y0),
        )
    }

    fn f(&self, _x: &Point, y: &Point) -> Result<f64> {
        Ok(0.5 * y.coords().norm_squared())
    }

    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(0.5 * (y.coords() - &self.c * x.coords()).norm_squared())
    }

    fn grad_f_x(&self, x: &Point, _y: &Point) -> Result<Tangent> {
        Ok(Tangent::zero(x))
    }

    fn grad_f_y(&self, _x: &Point, y: &Point) -> Result<Tangent> {
        Ok(Tangent::new(y, y.coords().clone()))
    }

    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(Tangent::new(y, y.coords() - &self.c * x.coords()))
    }

    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(Tangent::new(x, -(self.c.transpose() * (y.coords() - &self.c * x.coords()))))
    }

    fn hess_g_y_vec(&self, _x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        Ok(Tangent::new(y, v.coords().clone()))
    }

    /// `-C^T v`.
    fn cross_g_xy_vec(&self, x: &Point, _y: &Point, v: &Tangent) -> Result<Tangent> {
        Ok(Tangent::new(x, -(self.c.transpose() * v.coords())))
    }

    fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
        Some(Ok(Point::new_unchecked(self.my.id(), &self.c * x.coords())))
    }

    fn exact_hypergradient(&self, x: &Point) -> Option<Result<Tangent>> {
        let ctc = self.c.transpose() * &self.c;
        Some(Ok(Tangent::new(x, ctc * x.coords())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergradient::{approx_hypergradient, dense_hypergradient, hypergradient_error};
    use approx::assert_relative_eq;

    fn col(xs: &[f64]) -> Mat {
        Mat::from_column_slice(xs.len(), 1, xs)
    }

    #[test]
    fn hand_computed_gradient() {
        let p = ToyQuadratic::diagonal(&[1.0, 2.0], &[1.0, 1.0]).unwrap();
        let (x, _) = p.initial_point();
        let gf = p.exact_hypergradient(&x).unwrap().unwrap();
        assert_eq!(gf.coords(), &col(&[1.0, 4.0]));
        let zero = p.mx.point(col(&[0.0, 0.0])).unwrap();
        assert_eq!(p.exact_hypergradient(&zero).unwrap().unwrap().coords(), &col(&[0.0, 0.0]));
    }

    #[test]
    fn formula_at_exact_inputs_recovers_gradient() {
        let p = make_toy_quadratic(4, 6, 3).unwrap();
        let (x, _) = p.initial_point();
        let ys = p.lower_closed_form(&x).unwrap().unwrap();
        let vs = Tangent::new(&ys, ys.coords().clone());
        let hg = approx_hypergradient(&p, &x, &ys, &vs).unwrap();
        let exact = p.exact_hypergradient(&x).unwrap().unwrap();
        assert_relative_eq!(hg.coords(), exact.coords(), max_relative = 1e-12);
        let dense = dense_hypergradient(&p, &x, &ys).unwrap();
        assert_relative_eq!(dense.coords(), exact.coords(), max_relative = 1e-10);
    }

    #[test]
    fn error_is_linear_in_v_perturbation() {
        let p = ToyQuadratic::diagonal(&[1.0, 2.0, 3.0], &[1.0, -1.0, 0.5]).unwrap();
        let (x, _) = p.initial_point();
        let ys = p.lower_closed_form(&x).unwrap().unwrap();
        let delta = col(&[0.1, -0.2, 0.05]);
        let v = Tangent::new(&ys, ys.coords() + &delta);
        let err = hypergradient_error(&p, &x, &ys, &v).unwrap();
        let expected = delta.component_mul(&col(&[1.0, 2.0, 3.0])).norm();
        assert_relative_eq!(err, expected, max_relative = 1e-12);
        let exact_v = Tangent::new(&ys, ys.coords().clone());
        assert!(hypergradient_error(&p, &x, &ys, &exact_v).unwrap() <= 1e-8);
    }
}
