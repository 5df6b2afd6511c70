//! Dense symmetric matrix functions used by the SPD geometry and the
//! benchmark problems. Every eigendecomposition symmetrizes its input first.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Frobenius inner product.
pub fn frob(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

/// Symmetric eigendecomposition `A = Q diag(w) Q^T` of `(A + A^T)/2`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: Mat,
}

impl SymEig {
    pub fn new(a: &Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape {
                expected: (a.nrows(), a.nrows()),
                found: a.shape(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric eigendecomposition input".into()));
        }
        let eig = SymmetricEigen::try_new(sym(a), f64::EPSILON, 0)
            .ok_or_else(|| Error::Degenerate("symmetric eigensolver did not converge".into()))?;
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    /// `Q diag(f(w)) Q^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let fw = self.values.map(f);
        let scaled = &self.vectors * Mat::from_diagonal(&fw);
        sym(&(scaled * self.vectors.transpose()))
    }

    /// Apply the Daleckii-Krein operator `Q (L ∘ (Q^T E Q)) Q^T` where
    /// `L_ij` is the divided difference of `f` at `(w_i, w_j)`.
    pub fn frechet(&self, e: &Mat, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Mat {
        let n = self.values.len();
        let fw: Vec<f64> = self.values.iter().map(|&w| f(w)).collect();
        let mut inner = self.vectors.transpose() * e * &self.vectors;
        for i in 0..n {
            for j in 0..n {
                let (wi, wj) = (self.values[i], self.values[j]);
                let scale = wi.abs().max(wj.abs()).max(1e-300);
                let l = if (wi - wj).abs() <= 1e-12 * scale {
                    df(0.5 * (wi + wj))
                } else {
                    (fw[i] - fw[j]) / (wi - wj)
                };
                inner[(i, j)] *= l;
            }
        }
        sym(&(&self.vectors * inner * self.vectors.transpose()))
    }
}

/// Eigendecomposition of an SPD matrix; fails unless the minimum eigenvalue is positive.
pub fn spd_eig(a: &Mat) -> Result<SymEig> {
    let eig = SymEig::new(a)?;
    if eig.min() <= 0.0 {
        return Err(Error::Degenerate(format!(
            "matrix is not positive definite (min eigenvalue {:e})",
            eig.min()
        )));
    }
    Ok(eig)
}

/// Square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_pair(a: &Mat) -> Result<(Mat, Mat)> {
    let eig = spd_eig(a)?;
    Ok((eig.map(f64::sqrt), eig.map(|w| 1.0 / w.sqrt())))
}

pub fn spd_sqrt(a: &Mat) -> Result<Mat> {
    Ok(spd_eig(a)?.map(f64::sqrt))
}

pub fn spd_log(a: &Mat) -> Result<Mat> {
    Ok(spd_eig(a)?.map(f64::ln))
}

pub fn sym_exp(a: &Mat) -> Result<Mat> {
    Ok(SymEig::new(a)?.map(f64::exp))
}

/// Inverse of an SPD matrix through its Cholesky factor, `L^{-T} L^{-1}`.
pub fn spd_inv(a: &Mat) -> Result<Mat> {
    let chol = nalgebra::Cholesky::new(sym(a))
        .ok_or_else(|| Error::Degenerate("Cholesky factorization failed".into()))?;
    let li = lower_tri_inv(&chol.l());
    Ok(sym(&(li.transpose() * &li)))
}

/// Inverse of a nonsingular lower-triangular matrix, by forward
/// substitution one column at a time (column-major friendly).
fn lower_tri_inv(l: &Mat) -> Mat {
    let n = l.nrows();
    let ls = l.as_slice();
    let mut z = Mat::zeros(n, n);
    for (j, col) in z.as_mut_slice().chunks_exact_mut(n).enumerate() {
        col[j] = 1.0;
        for k in j..n {
            let zk = col[k] / ls[k * n + k];
            col[k] = zk;
            let lk = &ls[k * n..(k + 1) * n];
            for i in k + 1..n {
                col[i] -= lk[i] * zk;
            }
        }
    }
    z
}

/// Log-determinant of an SPD matrix.
pub fn spd_logdet(a: &Mat) -> Result<f64> {
    let chol = nalgebra::Cholesky::new(sym(a))
        .ok_or_else(|| Error::Degenerate("Cholesky factorization failed".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Thin QR with the sign convention `diag(R) > 0`, so the Q factor is unique.
pub fn qf(a: &Mat) -> Result<Mat> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Shape {
            expected: (n, n),
            found: (m, n),
        });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = r.diagonal().amax().max(f64::MIN_POSITIVE);
    for j in 0..n {
        let d = r[(j, j)];
        if d.abs() <= 1e-13 * scale || !d.is_finite() {
            return Err(Error::Degenerate(format!("rank-deficient QR factor (R[{j},{j}] = {d:e})")));
        }
        if d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

pub fn all_finite(a: &Mat) -> bool {
    a.iter().all(|v| v.is_finite())
}
