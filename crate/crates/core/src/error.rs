use thiserror::Error;

use crate::trace::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tangent vector was used at a point other than its base.
    #[error("base point mismatch: {0}")]
    BaseMismatch(String),

    #[error("manifold mismatch: expected {expected}, found {found}")]
    ManifoldMismatch { expected: String, found: String },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("point is not on {manifold}: {reason}")]
    NotOnManifold { manifold: String, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Logarithm requested outside the injectivity domain of the chart.
    #[error("outside injectivity domain: {0}")]
    Domain(String),

    #[error("tolerance out of range: {0}")]
    Tolerance(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// `<p, H p> <= 0` encountered inside conjugate gradient.
    #[error("operator is not positive definite: <p, H[p]> = {curvature:e}")]
    Indefinite { curvature: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The outer loop diverged; the partial trace is attached.
    #[error("run diverged at t = {}: {reason}", trace.records.len())]
    Diverged { reason: String, trace: Box<RunTrace> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that arise from the numerical state of an iterate rather than
    /// from misuse of the API. The outer loops convert these into divergence.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_)
                | Error::Domain(_)
                | Error::NonFinite(_)
                | Error::Indefinite { .. }
                | Error::NotOnManifold { .. }
        )
    }
}
