use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::Manifold;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, Mat};

/// Flat space of `rows × cols` real matrices with the Frobenius metric.
#[derive(Debug, Clone)]
pub struct Euclidean {
    rows: usize,
    cols: usize,
    id: String,
}

impl Euclidean {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            id: format!("euclidean({rows}x{cols})"),
        }
    }

    /// Column vectors of length `n`.
    pub fn vector(n: usize) -> Self {
        Self::new(n, 1)
    }
}

impl Manifold for Euclidean {
    fn id(&self) -> &str {
        &self.id
    }

    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn validate_point(&self, x: &Mat) -> Result<()> {
        if !all_finite(x) {
            return Err(Error::NonFinite("euclidean point".into()));
        }
        Ok(())
    }

    fn validate_tangent(&self, _x: &Mat, u: &Mat) -> Result<()> {
        self.validate_point(u)
    }

    fn metric(&self, _x: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.dot(v)
    }

    fn exp_map(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        Ok(x + u)
    }

    fn log_map(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        Ok(y - x)
    }

    fn retraction(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        Ok(x + u)
    }

    fn vector_transport(&self, _from: &Mat, _to: &Mat, u: &Mat) -> Result<Mat> {
        Ok(u.clone())
    }

    fn dist(&self, x: &Mat, y: &Mat) -> Result<f64> {
        Ok((y - x).norm())
    }

    fn euclidean_to_riemannian(&self, _x: &Mat, egrad: &Mat) -> Mat {
        egrad.clone()
    }

    fn project_tangent(&self, _x: &Mat, u: &Mat) -> Mat {
        u.clone()
    }

    fn project_point(&self, x: &Mat) -> Result<Mat> {
        Ok(x.clone())
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Mat {
        Mat::from_fn(self.rows, self.cols, |_, _| StandardNormal.sample(rng))
    }

    fn random_tangent(&self, _x: &Mat, rng: &mut dyn RngCore) -> Mat {
        Mat::from_fn(self.rows, self.cols, |_, _| StandardNormal.sample(rng))
    }

    fn isometric_transport(&self) -> bool {
        true
    }

    fn curvature_lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn tangent_basis(&self, _x: &Mat) -> Vec<Mat> {
        (0..self.dim())
            .map(|k| {
                let mut e = Mat::zeros(self.rows, self.cols);
                e[(k / self.cols, k % self.cols)] = 1.0;
                e
            })
            .collect()
    }
}
