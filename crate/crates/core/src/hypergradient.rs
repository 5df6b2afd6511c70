//! Approximate hypergradient
//!
//! ```text
//! ĜF(x, ŷ, v̂) = G_x f(x, ŷ) - G²_xy g(x, ŷ)[v̂]
//! ```
//!
//! and the residual `∇_v R = H_y g(x, ŷ)[v] - G_y f(x, ŷ)` of the quadratic
//! subproblem `R(v) = ½<v, H v> - <G_y f, v>`.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::{Point, Tangent};
use crate::problem::BilevelProblem;

/// Largest tangent dimension accepted by the dense reference solve.
pub const DENSE_DIM_CAP: usize = 10_000;

#[derive(Debug, Clone)]
pub struct QuadResidual {
    /// `H_y g[v] - G_y f`, based at `ŷ`.
    pub value: Tangent,
    pub norm_sq: f64,
}

pub fn quad_residual<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    v: &Tangent,
) -> Result<QuadResidual> {
    let rhs = problem.grad_f_y(x, y)?;
    quad_residual_with_rhs(problem, x, y, v, &rhs)
}

/// Same as [`quad_residual`] with `G_y f(x, ŷ)` supplied by the caller.
pub fn quad_residual_with_rhs<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    v: &Tangent,
    rhs: &Tangent,
) -> Result<QuadResidual> {
    problem.lower().check_base(y, v)?;
    let hv = problem.hess_g_y_vec(x, y, v)?;
    let value = hv.sub(rhs)?;
    let norm_sq = problem.lower().norm_sq(&value);
    Ok(QuadResidual { value, norm_sq })
}

pub fn approx_hypergradient<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    v: &Tangent,
) -> Result<Tangent> {
    problem.lower().check_base(y, v)?;
    let gx = problem.grad_f_x(x, y)?;
    let cross = problem.cross_g_xy_vec(x, y, v)?;
    gx.sub(&cross)
}

/// `||ĜF(x, ŷ, v̂) - GF(x)||_x` against the problem's exact oracle.
pub fn hypergradient_error<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
    v: &Tangent,
) -> Result<f64> {
    let exact = problem.exact_hypergradient(x).ok_or_else(|| {
        Error::Unsupported(format!("{}: no exact hypergradient oracle", problem.name()))
    })??;
    let approx = approx_hypergradient(problem, x, y, v)?;
    Ok(problem.upper().norm(&approx.sub(&exact)?))
}

/// Solve `H_y g(x, y)[v] = G_y f(x, y)` by assembling the Hessian in an
/// orthonormal tangent basis and factorizing it.
pub fn dense_linear_solve<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
) -> Result<Tangent> {
    let my = problem.lower();
    let dim = my.dim();
    if dim > DENSE_DIM_CAP {
        return Err(Error::Unsupported(format!(
            "dense hypergradient on {dim} tangent coordinates (cap {DENSE_DIM_CAP})"
        )));
    }
    let basis: Vec<Tangent> = my
        .tangent_basis(y.coords())
        .into_iter()
        .map(|b| Tangent::new(y, b))
        .collect();
    let n = basis.len();
    let rhs = problem.grad_f_y(x, y)?;
    let mut h = Mat::zeros(n, n);
    let mut b = nalgebra::DVector::zeros(n);
    for (j, ej) in basis.iter().enumerate() {
        let hej = problem.hess_g_y_vec(x, y, ej)?;
        for (i, ei) in basis.iter().enumerate() {
            h[(i, j)] = my.inner(y, ei, &hej)?;
        }
        b[j] = my.inner(y, ej, &rhs)?;
    }
    let h = crate::linalg::sym(&h);
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Degenerate("lower Hessian is not positive definite".into()))?;
    let c = chol.solve(&b);
    let mut v = Tangent::zero(y);
    for (ci, e) in c.iter().zip(&basis) {
        v.axpy(*ci, e)?;
    }
    Ok(v)
}

/// Exact hypergradient at a given lower solution `y = y*(x)`.
pub fn dense_hypergradient<P: BilevelProblem + ?Sized>(
    problem: &P,
    x: &Point,
    y: &Point,
) -> Result<Tangent> {
    let v = dense_linear_solve(problem, x, y)?;
    approx_hypergradient(problem, x, y, &v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Euclidean, Geometry};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use std::sync::Arc;

    /// `g = ½ y^T H y - x^T y`, `f = <b, y> + ½||x||²`; `G_y f = b`.
    struct Lin {
        m: Geometry,
        h: Mat,
        b: Mat,
    }

    impl Lin {
        fn new(diag: &[f64], b: &[f64]) -> Self {
            let n = diag.len();
            Self {
                m: Arc::new(Euclidean::vector(n)),
                h: Mat::from_diagonal(&DVector::from_column_slice(diag)),
                b: Mat::from_column_slice(n, 1, b),
            }
        }
    }

    impl BilevelProblem for Lin {
        fn name(&self) -> &str {
            "lin"
        }
        fn upper(&self) -> &Geometry {
            &self.m
        }
        fn lower(&self) -> &Geometry {
            &self.m
        }
        fn initial_point(&self) -> (Point, Point) {
            let n = self.b.nrows();
            let p = self.m.point(Mat::zeros(n, 1)).unwrap();
            (p.clone(), p)
        }
        fn f(&self, x: &Point, y: &Point) -> Result<f64> {
            Ok(self.b.dot(y.coords()) + 0.5 * x.coords().norm_squared())
        }
        fn g(&self, x: &Point, y: &Point) -> Result<f64> {
            let yv = y.coords();
            Ok(0.5 * (yv.transpose() * &self.h * yv)[(0, 0)] - x.coords().dot(yv))
        }
        fn grad_f_x(&self, x: &Point, _y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(x, x.coords().clone()))
        }
        fn grad_f_y(&self, _x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(y, self.b.clone()))
        }
        fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
            Ok(Tangent::new(y, &self.h * y.coords() - x.coords()))
        }
        fn hess_g_y_vec(&self, _x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
            Ok(Tangent::new(y, &self.h * v.coords()))
        }
        fn cross_g_xy_vec(&self, x: &Point, _y: &Point, v: &Tangent) -> Result<Tangent> {
            Ok(Tangent::new(x, -v.coords()))
        }
    }

    fn col(xs: &[f64]) -> Mat {
        Mat::from_column_slice(xs.len(), 1, xs)
    }

    #[test]
    fn residual_examples() {
        let p = Lin::new(&[1.0, 1.0, 1.0], &[1.0, -2.0, 3.0]);
        let (x, y) = p.initial_point();
        let r = quad_residual(&p, &x, &y, &Tangent::zero(&y)).unwrap();
        assert_eq!(r.value.coords(), &(-&p.b));
        let r = quad_residual(&p, &x, &y, &Tangent::new(&y, p.b.clone())).unwrap();
        assert_eq!(r.norm_sq, 0.0);

        let p = Lin::new(&[1.0, 2.0, 4.0], &[1.0, 1.0, 1.0]);
        let v = Tangent::new(&y, col(&[1.0, 0.5, 0.25]));
        let r = quad_residual(&p, &x, &y, &v).unwrap();
        assert_eq!(r.norm_sq, 0.0);
    }

    #[test]
    fn dense_solve_matches_direct() {
        let p = Lin::new(&[1.0, 2.0, 4.0], &[1.0, 1.0, 1.0]);
        let (x, y) = p.initial_point();
        let v = dense_linear_solve(&p, &x, &y).unwrap();
        assert_relative_eq!(v.coords(), &col(&[1.0, 0.5, 0.25]), epsilon = 1e-14);
        let hg = dense_hypergradient(&p, &x, &y).unwrap();
        assert_relative_eq!(hg.coords(), &col(&[1.0, 0.5, 0.25]), epsilon = 1e-14);
    }

    #[test]
    fn hypergradient_is_affine_in_v() {
        let p = Lin::new(&[1.0, 3.0], &[0.5, 0.5]);
        let (_, y) = p.initial_point();
        let x = p.m.point(col(&[0.3, -0.7])).unwrap();
        let v1 = Tangent::new(&y, col(&[1.5, -2.0]));
        let v2 = Tangent::new(&y, col(&[0.25, 4.0]));
        let lhs = approx_hypergradient(&p, &x, &y, &v1.add(&v2).unwrap())
            .unwrap()
            .add(&p.grad_f_x(&x, &y).unwrap())
            .unwrap();
        let rhs = approx_hypergradient(&p, &x, &y, &v1)
            .unwrap()
            .add(&approx_hypergradient(&p, &x, &y, &v2).unwrap())
            .unwrap();
        assert_relative_eq!(lhs.coords(), rhs.coords(), max_relative = 1e-12);
    }

    #[test]
    fn missing_oracle_is_unsupported() {
        let p = Lin::new(&[1.0], &[1.0]);
        let (x, y) = p.initial_point();
        assert!(matches!(
            hypergradient_error(&p, &x, &y, &Tangent::zero(&y)),
            Err(Error::Unsupported(_))
        ));
    }
}
