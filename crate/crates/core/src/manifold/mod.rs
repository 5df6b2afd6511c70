//! Manifold geometry: points, tangent vectors tagged with their base point,
//! and the [`Manifold`] trait implemented by every concrete geometry.
//!
//! Implementors supply the raw maps on coordinate matrices (`metric`,
//! `exp_map`, `log_map`, ...). The typed API (`inner`, `exp`, `log`, ...)
//! is provided on top and enforces that tangent vectors are used only at
//! their base point.

mod euclidean;
mod product;
mod simplex;
mod spd;
mod stiefel;

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub use euclidean::Euclidean;
pub use product::{Product, ProductPoint, ProductTangent};
pub use simplex::Simplex;
pub use spd::Spd;
pub use stiefel::Stiefel;

/// Shared handle to a geometry.
pub type Geometry = Arc<dyn Manifold>;

/// An element of a manifold. Coordinates are immutable and shared, so
/// cloning a point is cheap.
#[derive(Clone)]
pub struct Point {
    manifold: Arc<str>,
    coords: Arc<Mat>,
}

impl Point {
    /// Wrap coordinates without validation. Prefer [`Manifold::point`].
    pub fn new_unchecked(manifold: &str, coords: Mat) -> Self {
        Self {
            manifold: Arc::from(manifold),
            coords: Arc::new(coords),
        }
    }

    pub fn coords(&self) -> &Mat {
        &self.coords
    }

    pub fn manifold_id(&self) -> &str {
        &self.manifold
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coords.shape()
    }

    /// Same point: shared storage, or identical coordinates on the same manifold.
    pub fn same_as(&self, other: &Point) -> bool {
        Arc::ptr_eq(&self.coords, &other.coords)
            || (self.manifold == other.manifold && *self.coords == *other.coords)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Point")
            .field("manifold", &self.manifold)
            .field("shape", &self.coords.shape())
            .finish()
    }
}

/// An element of the tangent space at `base`.
#[derive(Clone)]
pub struct Tangent {
    base: Point,
    coords: Mat,
}

impl fmt::Debug for Tangent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tangent")
            .field("base", &self.base)
            .field("coords", &self.coords)
            .finish()
    }
}

impl Tangent {
    /// Wrap coordinates as a tangent at `base`. Tangency is not checked here;
    /// use [`Manifold::tangent`] for validated construction.
    pub fn new(base: &Point, coords: Mat) -> Self {
        Self {
            base: base.clone(),
            coords,
        }
    }

    pub fn zero(base: &Point) -> Self {
        let (r, c) = base.shape();
        Self::new(base, Mat::zeros(r, c))
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn coords(&self) -> &Mat {
        &self.coords
    }

    pub fn into_coords(self) -> Mat {
        self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|v| v.is_finite())
    }

    fn check_same_base(&self, other: &Tangent) -> Result<()> {
        if self.base.same_as(&other.base) {
            Ok(())
        } else {
            Err(Error::BaseMismatch(
                "tangent vectors live in different tangent spaces".into(),
            ))
        }
    }

    pub fn add(&self, other: &Tangent) -> Result<Tangent> {
        self.check_same_base(other)?;
        Ok(Tangent::new(&self.base, &self.coords + &other.coords))
    }

    pub fn sub(&self, other: &Tangent) -> Result<Tangent> {
        self.check_same_base(other)?;
        Ok(Tangent::new(&self.base, &self.coords - &other.coords))
    }

    pub fn scale(&self, s: f64) -> Tangent {
        Tangent::new(&self.base, &self.coords * s)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tangent) -> Result<()> {
        self.check_same_base(other)?;
        self.coords += &other.coords * alpha;
        Ok(())
    }
}

/// Interface shared by every geometry.
///
/// Points and tangent vectors are dense matrices of shape [`Manifold::shape`].
/// All maps are pure; implementations must be `Send + Sync`.
pub trait Manifold: Send + Sync + fmt::Debug {
    /// Identifier carried by points, e.g. `"spd(5)"`.
    fn id(&self) -> &str;

    /// Coordinate shape of points and tangents.
    fn shape(&self) -> (usize, usize);

    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    fn validate_point(&self, x: &Mat) -> Result<()>;

    fn validate_tangent(&self, x: &Mat, u: &Mat) -> Result<()>;

    fn metric(&self, x: &Mat, u: &Mat, v: &Mat) -> f64;

    fn exp_map(&self, x: &Mat, u: &Mat) -> Result<Mat>;

    fn log_map(&self, x: &Mat, y: &Mat) -> Result<Mat>;

    fn retraction(&self, x: &Mat, u: &Mat) -> Result<Mat>;

    fn vector_transport(&self, from: &Mat, to: &Mat, u: &Mat) -> Result<Mat>;

    fn dist(&self, x: &Mat, y: &Mat) -> Result<f64> {
        let u = self.log_map(x, y)?;
        Ok(self.metric(x, &u, &u).max(0.0).sqrt())
    }

    /// Riemannian gradient from the Euclidean gradient in ambient coordinates.
    fn euclidean_to_riemannian(&self, x: &Mat, egrad: &Mat) -> Mat;

    /// Orthogonal projection of an ambient matrix onto the tangent space at `x`.
    fn project_tangent(&self, x: &Mat, u: &Mat) -> Mat;

    /// Restore point invariants that drifted through rounding.
    fn project_point(&self, x: &Mat) -> Result<Mat>;

    fn random_point(&self, rng: &mut dyn RngCore) -> Mat;

    fn random_tangent(&self, x: &Mat, rng: &mut dyn RngCore) -> Mat;

    /// Whether `vector_transport` preserves the metric.
    fn isometric_transport(&self) -> bool;

    /// Lower bound on sectional curvature, when known.
    fn curvature_lower_bound(&self) -> Option<f64> {
        None
    }

    /// Radius around `x` within which `exp_map` stays in the manifold and
    /// `log_map` inverts it.
    fn exp_radius(&self, _x: &Mat) -> f64 {
        f64::INFINITY
    }

    /// An orthonormal basis of the tangent space at `x`.
    ///
    /// The default projects the ambient unit matrices and runs Gram-Schmidt
    /// in the manifold metric.
    fn tangent_basis(&self, x: &Mat) -> Vec<Mat> {
        let (r, c) = self.shape();
        let mut basis: Vec<Mat> = Vec::with_capacity(self.dim());
        for k in 0..r * c {
            let mut e = Mat::zeros(r, c);
            e[(k / c, k % c)] = 1.0;
            let mut u = self.project_tangent(x, &e);
            for _ in 0..2 {
                for b in &basis {
                    let proj = self.metric(x, &u, b);
                    u -= b * proj;
                }
            }
            let nrm = self.metric(x, &u, &u).max(0.0).sqrt();
            if nrm > 1e-8 {
                basis.push(u / nrm);
            }
            if basis.len() == self.dim() {
                break;
            }
        }
        basis
    }

    // ---- typed API --------------------------------------------------------

    /// Validate coordinates and wrap them as a point of this manifold.
    fn point(&self, coords: Mat) -> Result<Point> {
        self.check_shape(coords.shape())?;
        self.validate_point(&coords)?;
        Ok(Point::new_unchecked(self.id(), coords))
    }

    /// Validate coordinates and wrap them as a tangent at `x`.
    fn tangent(&self, x: &Point, coords: Mat) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_shape(coords.shape())?;
        self.validate_tangent(x.coords(), &coords)?;
        Ok(Tangent::new(x, coords))
    }

    fn check_shape(&self, found: (usize, usize)) -> Result<()> {
        if found != self.shape() {
            return Err(Error::Shape {
                expected: self.shape(),
                found,
            });
        }
        Ok(())
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.manifold_id() != self.id() {
            return Err(Error::ManifoldMismatch {
                expected: self.id().to_string(),
                found: x.manifold_id().to_string(),
            });
        }
        Ok(())
    }

    fn check_base(&self, x: &Point, u: &Tangent) -> Result<()> {
        self.check_point(x)?;
        if !u.base().same_as(x) {
            return Err(Error::BaseMismatch(format!(
                "tangent is not based at the given point of {}",
                self.id()
            )));
        }
        Ok(())
    }

    fn inner(&self, x: &Point, u: &Tangent, v: &Tangent) -> Result<f64> {
        self.check_base(x, u)?;
        self.check_base(x, v)?;
        Ok(self.metric(x.coords(), u.coords(), v.coords()))
    }

    fn norm(&self, u: &Tangent) -> f64 {
        self.norm_sq(u).max(0.0).sqrt()
    }

    fn norm_sq(&self, u: &Tangent) -> f64 {
        self.metric(u.base().coords(), u.coords(), u.coords())
    }

    fn exp(&self, x: &Point, u: &Tangent) -> Result<Point> {
        self.check_base(x, u)?;
        Ok(Point::new_unchecked(self.id(), self.exp_map(x.coords(), u.coords())?))
    }

    fn log(&self, x: &Point, y: &Point) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(Tangent::new(x, self.log_map(x.coords(), y.coords())?))
    }

    fn retract(&self, x: &Point, u: &Tangent) -> Result<Point> {
        self.check_base(x, u)?;
        Ok(Point::new_unchecked(self.id(), self.retraction(x.coords(), u.coords())?))
    }

    /// Step along `u` with either the exponential map or the retraction.
    fn step(&self, x: &Point, u: &Tangent, mode: MapMode) -> Result<Point> {
        match mode {
            MapMode::Exp => self.exp(x, u),
            MapMode::Retract => self.retract(x, u),
        }
    }

    fn transport(&self, from: &Point, to: &Point, u: &Tangent) -> Result<Tangent> {
        self.check_base(from, u)?;
        self.check_point(to)?;
        if from.same_as(to) {
            return Ok(Tangent::new(to, u.coords().clone()));
        }
        Ok(Tangent::new(
            to,
            self.vector_transport(from.coords(), to.coords(), u.coords())?,
        ))
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        self.dist(x.coords(), y.coords())
    }

    fn egrad_to_rgrad(&self, x: &Point, egrad: &Mat) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_shape(egrad.shape())?;
        Ok(Tangent::new(x, self.euclidean_to_riemannian(x.coords(), egrad)))
    }

    fn sample_point(&self, rng: &mut dyn RngCore) -> Point {
        Point::new_unchecked(self.id(), self.random_point(rng))
    }

    fn sample_tangent(&self, x: &Point, rng: &mut dyn RngCore) -> Tangent {
        Tangent::new(x, self.random_tangent(x.coords(), rng))
    }

    fn zero_tangent(&self, x: &Point) -> Tangent {
        Tangent::zero(x)
    }
}

/// Exponential map or retraction for iterate updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MapMode {
    #[default]
    Exp,
    Retract,
}

/// JSON form of a point or tangent coordinates: `{manifold, shape, data}`
/// with `data` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayRecord {
    pub manifold: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ArrayRecord {
    pub fn from_matrix(manifold: &str, m: &Mat) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            manifold: manifold.to_string(),
            shape: vec![r, c],
            data,
        }
    }

    pub fn from_point(p: &Point) -> Self {
        Self::from_matrix(p.manifold_id(), p.coords())
    }

    pub fn from_tangent(u: &Tangent) -> Self {
        Self::from_matrix(u.base().manifold_id(), u.coords())
    }

    pub fn to_matrix(&self) -> Result<Mat> {
        let (r, c) = match self.shape.as_slice() {
            [n] => (*n, 1),
            [r, c] => (*r, *c),
            other => {
                return Err(Error::Config(format!("unsupported array shape {other:?}")));
            }
        };
        if r * c != self.data.len() {
            return Err(Error::Config(format!(
                "shape {:?} does not match {} data entries",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Mat::from_row_slice(r, c, &self.data))
    }

    /// Rebuild a validated point on `manifold`.
    pub fn to_point(&self, manifold: &dyn Manifold) -> Result<Point> {
        if self.manifold != manifold.id() {
            return Err(Error::ManifoldMismatch {
                expected: manifold.id().to_string(),
                found: self.manifold.clone(),
            });
        }
        manifold.point(self.to_matrix()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inner_rejects_foreign_tangent() {
        let m = Euclidean::vector(2);
        let x = m.point(Mat::from_column_slice(2, 1, &[0.0, 0.0])).unwrap();
        let y = m.point(Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let u = Tangent::zero(&x);
        let v = Tangent::zero(&y);
        assert!(matches!(m.inner(&x, &u, &v), Err(Error::BaseMismatch(_))));
    }

    #[test]
    fn point_on_wrong_manifold_is_rejected() {
        let e = Euclidean::vector(2);
        let s = Simplex::new(2);
        let p = s.point(Mat::from_column_slice(2, 1, &[0.5, 0.5])).unwrap();
        assert!(matches!(
            e.distance(&p, &p),
            Err(Error::ManifoldMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn record_roundtrip(r in 1usize..4, c in 1usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
            let rec = ArrayRecord::from_matrix("euclidean", &m);
            let json = serde_json::to_string(&rec).unwrap();
            let back: ArrayRecord = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back.to_matrix().unwrap(), m);
        }
    }

    #[test]
    fn record_schema_is_row_major() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v: serde_json::Value =
            serde_json::to_value(ArrayRecord::from_matrix("spd(2)", &m)).unwrap();
        assert_eq!(v["manifold"], "spd(2)");
        assert_eq!(v["shape"], serde_json::json!([2, 2]));
        assert_eq!(v["data"], serde_json::json!([1.0, 2.0, 3.0, 4.0]));
    }
}
