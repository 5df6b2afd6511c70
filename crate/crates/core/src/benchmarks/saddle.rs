//! Min-max test problems, posed with `g = -f`.
//!
//! * [`Saddle`]: `f(x, y) = x y - ½ y²` on the real line; `y*(x) = x`,
//!   `F(x) = ½ x²`, unique stationary point `x = 0`.
//! * [`SphereSaddle`]: `f(x, y) = <B x, y> - ½||y||²` with `x` on the unit
//!   sphere and `y` Euclidean; `F(x) = ½||B x||²`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gaussian;
use crate::error::Result;
use crate::linalg::Mat;
use crate::manifold::{Euclidean, Geometry, Manifold, Point, Stiefel, Tangent};
use crate::problem::BilevelProblem;

#[derive(Debug, Clone)]
pub struct Saddle {
    m: Geometry,
    x0: f64,
}

pub fn make_saddle(x0: f64) -> Saddle {
    Saddle {
        m: Arc::new(Euclidean::vector(1)),
        x0,
    }
}

fn scalar(p: &Point) -> f64 {
    p.coords()[(0, 0)]
}

fn at(p: &Point, v: f64) -> Tangent {
    Tangent::new(p, Mat::from_element(1, 1, v))
}

impl BilevelProblem for Saddle {
    fn name(&self) -> &str {
        "saddle"
    }
    fn upper(&self) -> &Geometry {
        &self.m
    }
    fn lower(&self) -> &Geometry {
        &self.m
    }
    fn initial_point(&self) -> (Point, Point) {
        (
            Point::new_unchecked(self.m.id(), Mat::from_element(1, 1, self.x0)),
            Point::new_unchecked(self.m.id(), Mat::zeros(1, 1)),
        )
    }
    fn f(&self, x: &Point, y: &Point) -> Result<f64> {
        let (x, y) = (scalar(x), scalar(y));
        Ok(x * y - 0.5 * y * y)
    }
    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(-self.f(x, y)?)
    }
    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(at(x, scalar(y)))
    }
    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(at(y, scalar(x) - scalar(y)))
    }
    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(at(y, scalar(y) - scalar(x)))
    }
    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(at(x, -scalar(y)))
    }
    fn hess_g_y_vec(&self, _x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        Ok(Tangent::new(y, v.coords().clone()))
    }
    fn cross_g_xy_vec(&self, x: &Point, _y: &Point, v: &Tangent) -> Result<Tangent> {
        Ok(Tangent::new(x, -v.coords()))
    }
    fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
        Some(Ok(Point::new_unchecked(self.m.id(), x.coords().clone())))
    }
    fn exact_hypergradient(&self, x: &Point) -> Option<Result<Tangent>> {
        Some(Ok(Tangent::new(x, x.coords().clone())))
    }
}

#[derive(Debug, Clone)]
pub struct SphereSaddle {
    mx: Geometry,
    my: Geometry,
    b: Mat,
    x0: Mat,
}

/// `B` is `m × n` standard normal; `x0` a random unit vector.
pub fn make_sphere_saddle(n: usize, m: usize, seed: u64) -> SphereSaddle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian(m, n, &mut rng);
    let sphere = Stiefel::new(n, 1);
    let x0 = sphere.random_point(&mut rng);
    SphereSaddle {
        mx: Arc::new(sphere),
        my: Arc::new(Euclidean::vector(m)),
        b,
        x0,
    }
}

impl BilevelProblem for SphereSaddle {
    fn name(&self) -> &str {
        "sphere_saddle"
    }
    fn upper(&self) -> &Geometry {
        &self.mx
    }
    fn lower(&self) -> &Geometry {
        &self.my
    }
    fn initial_point(&self) -> (Point, Point) {
        (
            Point::new_unchecked(self.mx.id(), self.x0.clone()),
            Point::new_unchecked(self.my.id(), Mat::zeros(self.b.nrows(), 1)),
        )
    }
    fn f(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok((&self.b * x.coords()).dot(y.coords()) - 0.5 * y.coords().norm_squared())
    }
    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(-self.f(x, y)?)
    }
    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.mx.egrad_to_rgrad(x, &(self.b.transpose() * y.coords()))
    }
    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(Tangent::new(y, &self.b * x.coords() - y.coords()))
    }
    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(Tangent::new(y, y.coords() - &self.b * x.coords()))
    }
    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        Ok(self.grad_f_x(x, y)?.scale(-1.0))
    }
    fn hess_g_y_vec(&self, _x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        Ok(Tangent::new(y, v.coords().clone()))
    }
    fn cross_g_xy_vec(&self, x: &Point, _y: &Point, v: &Tangent) -> Result<Tangent> {
        self.mx.egrad_to_rgrad(x, &-(self.b.transpose() * v.coords()))
    }
    fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
        Some(Ok(Point::new_unchecked(self.my.id(), &self.b * x.coords())))
    }
}
