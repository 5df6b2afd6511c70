//! Synthetic bilevel problems with closed-form (or independently computed)
//! lower-level and hypergradient oracles.
//!
//! Each instance is determined by its [`ProblemSpec`]: raw data is
//! regenerated from the seed, never stored.

mod hyperrep;
mod robust;
mod saddle;
mod similarity;
mod toy;

use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Mat;
use crate::problem::BilevelProblem;

pub use hyperrep::{make_shallow_hyperrep, ShallowHyperRep};
pub use robust::{make_robust, karcher_mean, LossKind, Robust};
pub use saddle::{make_saddle, make_sphere_saddle, Saddle, SphereSaddle};
pub use similarity::{make_simple_similarity, SimpleSimilarity};
pub use toy::{make_toy_quadratic, ToyQuadratic};

pub(crate) fn gaussian(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut *rng))
}

fn default_noise_sd() -> f64 {
    0.1
}

/// Replayable description of a benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    ToyQuadratic {
        nx: usize,
        ny: usize,
        #[serde(default)]
        seed: u64,
    },
    SimpleSimilarity {
        n: usize,
        d: usize,
        r: usize,
        lambda: f64,
        #[serde(default)]
        seed: u64,
    },
    ShallowHyperrep {
        n: usize,
        d: usize,
        r: usize,
        lambda: f64,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
        #[serde(default)]
        seed: u64,
    },
    Robust {
        loss: LossKind,
        n: usize,
        d: usize,
        #[serde(default)]
        seed: u64,
    },
    Saddle {
        #[serde(default = "one")]
        x0: f64,
    },
    SphereSaddle {
        n: usize,
        m: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Arc<dyn BilevelProblem>> {
        Ok(match *self {
            ProblemSpec::ToyQuadratic { nx, ny, seed } => Arc::new(make_toy_quadratic(nx, ny, seed)?),
            ProblemSpec::SimpleSimilarity { n, d, r, lambda, seed } => {
                Arc::new(make_simple_similarity(n, d, r, lambda, seed)?)
            }
            ProblemSpec::ShallowHyperrep {
                n,
                d,
                r,
                lambda,
                noise_sd,
                seed,
            } => Arc::new(make_shallow_hyperrep(n, d, r, lambda, noise_sd, seed)?),
            ProblemSpec::Robust { loss, n, d, seed } => Arc::new(make_robust(loss, n, d, seed)?),
            ProblemSpec::Saddle { x0 } => Arc::new(make_saddle(x0)),
            ProblemSpec::SphereSaddle { n, m, seed } => Arc::new(make_sphere_saddle(n, m, seed)),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::ToyQuadratic { .. } => "toy_quadratic",
            ProblemSpec::SimpleSimilarity { .. } => "simple_similarity",
            ProblemSpec::ShallowHyperrep { .. } => "shallow_hyperrep",
            ProblemSpec::Robust { .. } => "robust",
            ProblemSpec::Saddle { .. } => "saddle",
            ProblemSpec::SphereSaddle { .. } => "sphere_saddle",
        }
    }

    /// Same instance family with a different data seed.
    pub fn with_seed(&self, s: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ProblemSpec::ToyQuadratic { seed, .. }
            | ProblemSpec::SimpleSimilarity { seed, .. }
            | ProblemSpec::ShallowHyperrep { seed, .. }
            | ProblemSpec::Robust { seed, .. }
            | ProblemSpec::SphereSaddle { seed, .. } => *seed = s,
            ProblemSpec::Saddle { .. } => {}
        }
        out
    }
}
