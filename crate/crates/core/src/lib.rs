//! Fully adaptive Riemannian bilevel optimization.
//!
//! Geometry lives in [`manifold`], the oracle interface in [`problem`], and
//! the solvers in [`inner`], [`adarhd`] and [`baselines`]. [`benchmarks`]
//! builds the synthetic test problems and [`diagnostics`] checks oracles
//! against finite differences.

pub mod adarhd;
pub mod baselines;
pub mod benchmarks;
pub mod diagnostics;
pub mod error;
pub mod hypergradient;
pub mod inner;
pub mod linalg;
pub mod manifold;
pub mod problem;
pub mod trace;

pub use adarhd::{run_adarhd, run_minmax, trace_or_diverged, AdaRHDConfig, CapSchedule, InnerMode};
pub use baselines::{run_rhgd, RHGDConfig};
pub use benchmarks::{LossKind, ProblemSpec};
pub use diagnostics::CheckReport;
pub use error::{Error, Result};
pub use hypergradient::{approx_hypergradient, hypergradient_error, quad_residual, QuadResidual};
pub use linalg::Mat;
pub use manifold::{
    ArrayRecord, Euclidean, Geometry, MapMode, Manifold, Point, Product, Simplex, Spd, Stiefel,
    Tangent,
};
pub use problem::BilevelProblem;
pub use trace::{ergodic_min_gradnorm, IterRecord, RowStatus, RunStatus, RunTrace};
