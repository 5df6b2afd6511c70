use rand::RngCore;

use super::{Geometry, Manifold, Point, Tangent};
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Cartesian product of geometries. Coordinates of all factors are packed
/// (column-major, factor after factor) into a single column vector.
#[derive(Debug, Clone)]
pub struct Product {
    factors: Vec<Geometry>,
    offsets: Vec<usize>,
    len: usize,
    id: String,
}

/// A point of a [`Product`] split into its factors.
#[derive(Debug, Clone)]
pub struct ProductPoint(pub Vec<Point>);

/// A tangent of a [`Product`] split into its factors.
#[derive(Debug, Clone)]
pub struct ProductTangent(pub Vec<Tangent>);

impl Product {
    pub fn new(factors: Vec<Geometry>) -> Self {
        assert!(!factors.is_empty(), "product of zero manifolds");
        let mut offsets = Vec::with_capacity(factors.len());
        let mut len = 0;
        for f in &factors {
            offsets.push(len);
            let (r, c) = f.shape();
            len += r * c;
        }
        let id = format!(
            "product[{}]",
            factors.iter().map(|f| f.id()).collect::<Vec<_>>().join(",")
        );
        Self {
            factors,
            offsets,
            len,
            id,
        }
    }

    pub fn factors(&self) -> &[Geometry] {
        &self.factors
    }

    fn unpack(&self, x: &Mat) -> Vec<Mat> {
        self.factors
            .iter()
            .zip(&self.offsets)
            .map(|(f, &off)| {
                let (r, c) = f.shape();
                Mat::from_column_slice(r, c, &x.as_slice()[off..off + r * c])
            })
            .collect()
    }

    fn pack(&self, parts: &[Mat]) -> Mat {
        let mut out = Mat::zeros(self.len, 1);
        for (p, &off) in parts.iter().zip(&self.offsets) {
            out.as_mut_slice()[off..off + p.len()].copy_from_slice(p.as_slice());
        }
        out
    }

    fn map2(&self, x: &Mat, u: &Mat, f: impl Fn(&Geometry, &Mat, &Mat) -> Result<Mat>) -> Result<Mat> {
        let xs = self.unpack(x);
        let us = self.unpack(u);
        let parts = self
            .factors
            .iter()
            .zip(xs.iter().zip(&us))
            .map(|(g, (xi, ui))| f(g, xi, ui))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.pack(&parts))
    }

    pub fn split_point(&self, x: &Point) -> Result<ProductPoint> {
        self.check_point(x)?;
        Ok(ProductPoint(
            self.factors
                .iter()
                .zip(self.unpack(x.coords()))
                .map(|(f, c)| Point::new_unchecked(f.id(), c))
                .collect(),
        ))
    }

    pub fn join_point(&self, parts: &ProductPoint) -> Result<Point> {
        if parts.0.len() != self.factors.len() {
            return Err(Error::Config("wrong number of product factors".into()));
        }
        for (f, p) in self.factors.iter().zip(&parts.0) {
            f.check_point(p)?;
        }
        let coords: Vec<Mat> = parts.0.iter().map(|p| p.coords().clone()).collect();
        Ok(Point::new_unchecked(&self.id, self.pack(&coords)))
    }

    pub fn split_tangent(&self, u: &Tangent) -> Result<ProductTangent> {
        let base = self.split_point(u.base())?;
        Ok(ProductTangent(
            base.0
                .iter()
                .zip(self.unpack(u.coords()))
                .map(|(b, c)| Tangent::new(b, c))
                .collect(),
        ))
    }

    pub fn join_tangent(&self, base: &Point, parts: &ProductTangent) -> Result<Tangent> {
        let coords: Vec<Mat> = parts.0.iter().map(|t| t.coords().clone()).collect();
        Ok(Tangent::new(base, self.pack(&coords)))
    }
}

impl Manifold for Product {
    fn id(&self) -> &str {
        &self.id
    }

    fn shape(&self) -> (usize, usize) {
        (self.len, 1)
    }

    fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }

    fn validate_point(&self, x: &Mat) -> Result<()> {
        for (f, xi) in self.factors.iter().zip(self.unpack(x)) {
            f.validate_point(&xi)?;
        }
        Ok(())
    }

    fn validate_tangent(&self, x: &Mat, u: &Mat) -> Result<()> {
        for (f, (xi, ui)) in self.factors.iter().zip(self.unpack(x).iter().zip(self.unpack(u).iter())) {
            f.validate_tangent(xi, ui)?;
        }
        Ok(())
    }

    fn metric(&self, x: &Mat, u: &Mat, v: &Mat) -> f64 {
        let (xs, us, vs) = (self.unpack(x), self.unpack(u), self.unpack(v));
        self.factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.metric(&xs[i], &us[i], &vs[i]))
            .sum()
    }

    fn exp_map(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        self.map2(x, u, |g, a, b| g.exp_map(a, b))
    }

    fn log_map(&self, x: &Mat, y: &Mat) -> Result<Mat> {
        self.map2(x, y, |g, a, b| g.log_map(a, b))
    }

    fn retraction(&self, x: &Mat, u: &Mat) -> Result<Mat> {
        self.map2(x, u, |g, a, b| g.retraction(a, b))
    }

    fn vector_transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat> {
        let tos = self.unpack(to);
        let froms = self.unpack(from);
        let us = self.unpack(u);
        let parts = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.vector_transport(&froms[i], &tos[i], &us[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.pack(&parts))
    }

    fn euclidean_to_riemannian(&self, x: &Mat, egrad: &Mat) -> Mat {
        let (xs, gs) = (self.unpack(x), self.unpack(egrad));
        let parts: Vec<Mat> = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.euclidean_to_riemannian(&xs[i], &gs[i]))
            .collect();
        self.pack(&parts)
    }

    fn project_tangent(&self, x: &Mat, u: &Mat) -> Mat {
        let (xs, us) = (self.unpack(x), self.unpack(u));
        let parts: Vec<Mat> = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.project_tangent(&xs[i], &us[i]))
            .collect();
        self.pack(&parts)
    }

    fn project_point(&self, x: &Mat) -> Result<Mat> {
        let parts = self
            .factors
            .iter()
            .zip(self.unpack(x))
            .map(|(f, xi)| f.project_point(&xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.pack(&parts))
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Mat {
        let parts: Vec<Mat> = self.factors.iter().map(|f| f.random_point(rng)).collect();
        self.pack(&parts)
    }

    fn random_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat {
        let parts: Vec<Mat> = self
            .factors
            .iter()
            .zip(self.unpack(x))
            .map(|(f, xi)| f.random_tangent(&xi, rng))
            .collect();
        self.pack(&parts)
    }

    fn isometric_transport(&self) -> bool {
        self.factors.iter().all(|f| f.isometric_transport())
    }

    fn curvature_lower_bound(&self) -> Option<f64> {
        // mixed planes between factors are flat
        self.factors
            .iter()
            .map(|f| f.curvature_lower_bound())
            .try_fold(0.0f64, |acc, k| k.map(|k| acc.min(k)))
    }

    fn tangent_basis(&self, x: &Mat) -> Vec<Mat> {
        let xs = self.unpack(x);
        let mut out = Vec::with_capacity(self.dim());
        for (i, f) in self.factors.iter().enumerate() {
            for b in f.tangent_basis(&xs[i]) {
                let mut parts: Vec<Mat> = self
                    .factors
                    .iter()
                    .map(|g| {
                        let (r, c) = g.shape();
                        Mat::zeros(r, c)
                    })
                    .collect();
                parts[i] = b;
                out.push(self.pack(&parts));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Euclidean, Spd, Stiefel};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn product() -> Product {
        Product::new(vec![
            Arc::new(Stiefel::new(4, 2)),
            Arc::new(Stiefel::new(3, 1)),
            Arc::new(Spd::new(2)),
            Arc::new(Euclidean::vector(3)),
        ])
    }

    #[test]
    fn inner_is_sum_of_factor_inners() {
        let m = product();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x = m.sample_point(&mut rng);
        let u = m.sample_tangent(&x, &mut rng);
        let v = m.sample_tangent(&x, &mut rng);
        let px = m.split_point(&x).unwrap();
        let pu = m.split_tangent(&u).unwrap();
        let pv = m.split_tangent(&v).unwrap();
        let sum: f64 = m
            .factors()
            .iter()
            .enumerate()
            .map(|(i, f)| f.inner(&px.0[i], &pu.0[i], &pv.0[i]).unwrap())
            .sum();
        assert_relative_eq!(m.inner(&x, &u, &v).unwrap(), sum, epsilon = 1e-12);
    }

    #[test]
    fn split_join_roundtrip_and_componentwise_retraction() {
        let m = product();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x = m.sample_point(&mut rng);
        m.validate_point(x.coords()).unwrap();
        let parts = m.split_point(&x).unwrap();
        let back = m.join_point(&parts).unwrap();
        assert_eq!(back.coords(), x.coords());
        let u = m.sample_tangent(&x, &mut rng).scale(0.1);
        let y = m.retract(&x, &u).unwrap();
        m.validate_point(y.coords()).unwrap();
        assert_eq!(m.tangent_basis(x.coords()).len(), m.dim());
    }
}
