//! Oracle interface for bilevel problems
//!
//! ```text
//! min_{x in Mx} F(x) = f(x, y*(x))   s.t.  y*(x) = argmin_{y in My} g(x, y)
//! ```
//!
//! plus finite-difference fallbacks for the second-order operators.
//!
//! Cross-derivative convention: `cross_g_xy_vec(x, y, v)` maps `T_y My -> T_x Mx`
//! and is the Riemannian x-gradient of `x -> <G_y g(x, y), v>_y`. For
//! `g = -x^T y` on Euclidean spaces this is `-v`; the adjoint
//! `T_x -> T_y` is the y-variation of `G_y g` along x directions. The
//! diagnostics module checks the pair for consistency.

use crate::error::{Error, Result};
use crate::manifold::{Geometry, Point, Tangent};

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Oracle bundle of a bilevel problem.
///
/// Implementations must be reentrant: oracles can be called concurrently
/// from several threads.
pub trait BilevelProblem: Send + Sync {
    fn name(&self) -> &str;

    /// Geometry of the upper-level variable `x`.
    fn upper(&self) -> &Geometry;

    /// Geometry of the lower-level variable `y`.
    fn lower(&self) -> &Geometry;

    /// Starting point `(x0, y0)`.
    fn initial_point(&self) -> (Point, Point);

    fn f(&self, x: &Point, y: &Point) -> Result<f64>;

    fn g(&self, x: &Point, y: &Point) -> Result<f64>;

    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent>;

    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent>;

    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent>;

    /// `G_x g`. Only needed by the finite-difference cross-derivative.
    fn grad_g_x(&self, _x: &Point, _y: &Point) -> Result<Tangent> {
        Err(Error::Unsupported(format!("{}: grad_g_x oracle", self.name())))
    }

    /// `H_y g(x, y)[v]`. Falls back to transported central differences.
    fn hess_g_y_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        fd_hess_g_y_vec(self, x, y, v, DEFAULT_FD_STEP)
    }

    /// `G²_xy g(x, y)[v]`. Falls back to central differences of `G_x g`.
    fn cross_g_xy_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        fd_cross_g_xy_vec(self, x, y, v, DEFAULT_FD_STEP)
    }

    /// Reference lower-level solution `y*(x)`, if the problem has one.
    fn lower_closed_form(&self, _x: &Point) -> Option<Result<Point>> {
        None
    }

    /// Exact hypergradient `GF(x)`. The default composes the closed-form
    /// lower solution with a dense solve of the Hessian system.
    fn exact_hypergradient(&self, x: &Point) -> Option<Result<Tangent>> {
        let y = self.lower_closed_form(x)?;
        Some(y.and_then(|y| crate::hypergradient::dense_hypergradient(self, x, &y)))
    }
}

fn fd_step(h: f64, v: &Tangent, lower: &Geometry) -> Result<f64> {
    if !(h >= 1e-10) {
        return Err(Error::Tolerance(format!("finite-difference step {h:e} below 1e-10")));
    }
    Ok(h / (1.0 + lower.norm(v)))
}

/// `[P_{y+ -> y} G_y g(x, Exp_y(t v)) - P_{y- -> y} G_y g(x, Exp_y(-t v))] / 2t`
/// with `t = h / (1 + ||v||)`.
pub fn fd_hess_g_y_vec<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    v: &Tangent,
    h: f64,
) -> Result<Tangent> {
    let my = problem.lower();
    let t = fd_step(h, v, my)?;
    let y_plus = my.exp(y, &v.scale(t))?;
    let y_minus = my.exp(y, &v.scale(-t))?;
    let g_plus = my.transport(&y_plus, y, &problem.grad_g_y(x, &y_plus)?)?;
    let g_minus = my.transport(&y_minus, y, &problem.grad_g_y(x, &y_minus)?)?;
    Ok(g_plus.sub(&g_minus)?.scale(0.5 / t))
}

/// `[G_x g(x, Exp_y(t v)) - G_x g(x, Exp_y(-t v))] / 2t`; both terms live at `x`.
pub fn fd_cross_g_xy_vec<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    v: &Tangent,
    h: f64,
) -> Result<Tangent> {
    let my = problem.lower();
    let t = fd_step(h, v, my)?;
    let y_plus = my.exp(y, &v.scale(t))?;
    let y_minus = my.exp(y, &v.scale(-t))?;
    let g_plus = problem.grad_g_x(x, &y_plus)?;
    let g_minus = problem.grad_g_x(x, &y_minus)?;
    Ok(g_plus.sub(&g_minus)?.scale(0.5 / t))
}

/// `G²_yx g(x, y)[u]`, the x-variation of `G_y g` along `u`, by central differences.
pub fn fd_cross_g_yx_vec<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    u: &Tangent,
    h: f64,
) -> Result<Tangent> {
    let mx = problem.upper();
    let t = fd_step(h, u, mx)?;
    let x_plus = mx.exp(x, &u.scale(t))?;
    let x_minus = mx.exp(x, &u.scale(-t))?;
    let g_plus = problem.grad_g_y(&x_plus, y)?;
    let g_minus = problem.grad_g_y(&x_minus, y)?;
    Ok(g_plus.sub(&g_minus)?.scale(0.5 / t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::manifold::Euclidean;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    /// Euclidean test problem `g = ½ y^T D y - s x^T y + ½ (sep) ||x||²`, `f = ½||y||²`.
    struct Quad {
        mx: Geometry,
        my: Geometry,
        d: Vec<f64>,
        coupling: f64,
    }

    impl Quad {
        fn new(d: Vec<f64>, coupling: f64) -> Self {
            let n = d.len();
            Self {
                mx: Arc::new(Euclidean::vector(n)),
                my: Arc::new(Euclidean::vector(n)),
                d,
                coupling,
            }
        }
        fn dmat(&self) -> Mat {
            Mat::from_diagonal(&nalgebra::DVector::from_vec(self.d.clone()))
        }
    }

    impl BilevelProblem for Quad {
        fn name(&self) -> &str {
            "quad"
        }
        fn upper(&self) -> &Geometry {
            &self.mx
        }
        fn lower(&self) -> &Geometry {
            &self.my
        }
        fn initial_point(&self) -> (Point, Point) {
            let n = self.d.len();
            (
                self.mx.point(Mat::zeros(n, 1)).unwrap(),
                self.my.point(Mat::zeros(n, 1)).unwrap(),
            )
        }
        fn f(&self, _x: &Point, y: &Point) -> Result<f64> {
            Ok(0.5 * y.coords().norm_squared())
        }
        fn g(&self, x: &Point, y: &Point) -> Result<f64> {
            let yv = y.coords();
            Ok(0.5 * (yv.transpose() * self.dmat() * yv)[(0, 0)]
                - self.coupling * x.coords().dot(yv)
                + 0.5 * x.coords().norm_squared())
        }
        fn grad_f_x(&self, x: &Point, _y: &Point) -> Result<Tangent> {
            Ok(Tangent::zero(x))
        }
        fn grad_f_y(&self, _x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(y, y.coords().clone()))
        }
        fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(y, self.dmat() * y.coords() - x.coords() * self.coupling))
        }
        fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(x, x.coords() - y.coords() * self.coupling))
        }
    }

    fn col(xs: &[f64]) -> Mat {
        Mat::from_column_slice(xs.len(), 1, xs)
    }

    #[test]
    fn fd_hessian_identity_and_diagonal() {
        let p = Quad::new(vec![1.0, 1.0], 1.0);
        let (x, y) = p.initial_point();
        let v = Tangent::new(&y, col(&[0.3, -2.0]));
        let hv = p.hess_g_y_vec(&x, &y, &v).unwrap();
        assert_relative_eq!(hv.coords(), v.coords(), epsilon = 1e-9);

        let p = Quad::new(vec![1.0, 4.0], 1.0);
        let v = Tangent::new(&y, col(&[1.0, 1.0]));
        let hv = p.hess_g_y_vec(&x, &y, &v).unwrap();
        assert_relative_eq!(hv.coords(), &col(&[1.0, 4.0]), epsilon = 1e-9);
    }

    #[test]
    fn fd_cross_of_bilinear_coupling_is_minus_v() {
        let p = Quad::new(vec![1.0, 1.0, 1.0], 1.0);
        let (x, y) = p.initial_point();
        let v = Tangent::new(&y, col(&[0.5, -1.0, 2.0]));
        let c = p.cross_g_xy_vec(&x, &y, &v).unwrap();
        assert_relative_eq!(c.coords(), &(-v.coords()), epsilon = 1e-9);
        assert!(c.base().same_as(&x));
    }

    #[test]
    fn separable_cross_vanishes() {
        let p = Quad::new(vec![2.0, 3.0], 0.0);
        let (x, y) = p.initial_point();
        let v = Tangent::new(&y, col(&[1.0, 1.0]));
        let c = p.cross_g_xy_vec(&x, &y, &v).unwrap();
        assert!(c.coords().norm() < 1e-12);
    }

    #[test]
    fn tiny_step_is_rejected() {
        let p = Quad::new(vec![1.0], 1.0);
        let (x, y) = p.initial_point();
        let v = Tangent::new(&y, col(&[1.0]));
        assert!(matches!(
            fd_hess_g_y_vec(&p, &x, &y, &v, 1e-12),
            Err(Error::Tolerance(_))
        ));
    }
}
