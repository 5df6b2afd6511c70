//! Maximum similarity between two data matrices, with the Mahalanobis-type
//! metric `M` learned by the lower level.
//!
//! With `A = X^T X`, `C = Y^T Y`, `P = X^T Y` and `B(W) = W C W^T + λ I`:
//!
//! * upper (minimized): `f(W, M) = -tr(M P W^T)`, `W ∈ St(d, r)`
//! * lower: `g(W, M) = <M, A> + <M^{-1}, B(W)>`, `M ∈ SPD(d)`
//!
//! The lower solution is the geometric mean `M* = A^{-1/2}(A^{1/2} B A^{1/2})^{1/2} A^{-1/2}`,
//! i.e. the unique SPD solution of `M A M = B`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gaussian;
use crate::error::{Error, Result};
use crate::linalg::{spd_eig, spd_inv, spd_sqrt_pair, sym, Mat};
use crate::manifold::{Geometry, Manifold, Point, Spd, Stiefel, Tangent};
use crate::problem::BilevelProblem;

#[derive(Debug, Clone)]
pub struct SimpleSimilarity {
    mx: Geometry,
    my: Geometry,
    a: Mat,
    c: Mat,
    p: Mat,
    lambda: f64,
    w0: Mat,
}

pub fn make_simple_similarity(n: usize, d: usize, r: usize, lambda: f64, seed: u64) -> Result<SimpleSimilarity> {
    if !(n >= d && d >= r && r >= 1) {
        return Err(Error::Config(format!(
            "simple similarity needs n >= d >= r >= 1, got n={n} d={d} r={r}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, d, &mut rng);
    let y = gaussian(n, r, &mut rng);
    let st = Stiefel::new(d, r);
    let w0 = st.random_point(&mut rng);
    let a = sym(&(x.transpose() * &x));
    spd_eig(&a)?;
    Ok(SimpleSimilarity {
        mx: Arc::new(st),
        my: Arc::new(Spd::new(d)),
        c: sym(&(y.transpose() * &y)),
        p: x.transpose() * &y,
        a,
        lambda,
        w0,
    })
}

impl SimpleSimilarity {
    pub fn gram(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self, w: &Mat) -> Mat {
        let d = w.nrows();
        sym(&(w * &self.c * w.transpose())) + Mat::identity(d, d) * self.lambda
    }

    fn m_star(&self, w: &Mat) -> Result<Mat> {
        let (ah, aih) = spd_sqrt_pair(&self.a)?;
        let inner = sym(&(&ah * self.b(w) * &ah));
        let (s, _) = spd_sqrt_pair(&inner)?;
        Ok(sym(&(&aih * s * &aih)))
    }

    /// Tangent-space Sylvester solve of `U A M + M A U = G` at `M`.
    fn solve_lyap(&self, m: &Mat, g: &Mat) -> Result<Mat> {
        let (mh, mih) = spd_sqrt_pair(m)?;
        let s = spd_eig(&sym(&(&mh * &self.a * &mh)))?;
        let q = &s.vectors;
        let mut z = q.transpose() * (&mih * g * &mih) * q;
        let k = z.nrows();
        for i in 0..k {
            for j in 0..k {
                z[(i, j)] /= s.values[i] + s.values[j];
            }
        }
        let z = q * z * q.transpose();
        Ok(sym(&(&mh * z * &mh)))
    }
}

impl BilevelProblem for SimpleSimilarity {
    fn name(&self) -> &str {
        "simple_similarity"
    }

    fn upper(&self) -> &Geometry {
        &self.mx
    }

    fn lower(&self) -> &Geometry {
        &self.my
    }

    fn initial_point(&self) -> (Point, Point) {
        let d = self.a.nrows();
        (
            Point::new_unchecked(self.mx.id(), self.w0.clone()),
            Point::new_unchecked(self.my.id(), Mat::identity(d, d)),
        )
    }

    fn f(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(-(y.coords() * &self.p).dot(x.coords()))
    }

    fn g(&self, x: &Point, y: &Point) -> Result<f64> {
        let mi = spd_inv(y.coords())?;
        Ok(y.coords().dot(&self.a) + mi.dot(&self.b(x.coords())))
    }

    fn grad_f_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.mx.egrad_to_rgrad(x, &-(y.coords() * &self.p))
    }

    fn grad_f_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let e = -sym(&(&self.p * x.coords().transpose()));
        self.my.egrad_to_rgrad(y, &e)
    }

    /// `M A M - B`.
    fn grad_g_y(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let m = y.coords();
        Ok(Tangent::new(y, sym(&(m * &self.a * m)) - self.b(x.coords())))
    }

    fn grad_g_x(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let mi = spd_inv(y.coords())?;
        self.mx.egrad_to_rgrad(x, &(mi * x.coords() * &self.c * 2.0))
    }

    /// `½(U M^{-1} B + B M^{-1} U + U A M + M A U)`.
    fn hess_g_y_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        let m = y.coords();
        let u = v.coords();
        let mi = spd_inv(m)?;
        let b = self.b(x.coords());
        let t = u * &mi * &b + u * &self.a * m;
        Ok(Tangent::new(y, sym(&t)))
    }

    /// `proj_W(-2 M^{-1} V M^{-1} W C)`.
    fn cross_g_xy_vec(&self, x: &Point, y: &Point, v: &Tangent) -> Result<Tangent> {
        let mi = spd_inv(y.coords())?;
        let e = &mi * v.coords() * &mi * x.coords() * &self.c * -2.0;
        self.mx.egrad_to_rgrad(x, &e)
    }

    fn lower_closed_form(&self, x: &Point) -> Option<Result<Point>> {
        Some(self.m_star(x.coords()).map(|m| Point::new_unchecked(self.my.id(), m)))
    }

    /// At `M*` the Hessian reduces to `U ↦ U A M + M A U`, which is solved
    /// exactly in the eigenbasis of `M^{1/2} A M^{1/2}`.
    fn exact_hypergradient(&self, x: &Point) -> Option<Result<Tangent>> {
        Some((|| {
            let m = self.m_star(x.coords())?;
            let y = Point::new_unchecked(self.my.id(), m.clone());
            let gy = self.grad_f_y(x, &y)?;
            let u = self.solve_lyap(&m, gy.coords())?;
            let cross = self.cross_g_xy_vec(x, &y, &Tangent::new(&y, u))?;
            self.grad_f_x(x, &y)?.sub(&cross)
        })())
    }
}
