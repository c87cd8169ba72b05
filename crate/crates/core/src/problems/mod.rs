//! Problem instances and their stochastic first-order oracles.

mod idx;
mod lrmc;
mod pca;
mod snapshot;

pub use idx::{load_idx_images, parse_idx_images, split_rows, RowSplit, IDX3_MAGIC};
pub use lrmc::{
    gen_lrmc, lrmc_euclidean_gradient, lrmc_inner_solve, lrmc_residual, lrmc_riemannian_gradient,
    observation_rate, LrmcInstance, INNER_DAMPING,
};
pub use pca::{gen_synthetic_pca, pca_objective, pca_riemannian_gradient, PcaInstance};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::{project_to_tangent, StiefelPoint, TangentVector};
use crate::rng::Rng;

/// How a node's local loss is normalized by its sample count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveScaling {
    /// Local loss is the mean over local samples.
    #[default]
    PerSample,
    /// Local loss is the plain sum over local samples.
    Raw,
}

impl ObjectiveScaling {
    /// Factor applied to a sum over `used` samples drawn from `available`.
    fn factor(self, used: usize, available: usize) -> f64 {
        match self {
            ObjectiveScaling::PerSample => 1.0 / used as f64,
            ObjectiveScaling::Raw => available as f64 / used as f64,
        }
    }
}

impl FromStr for ObjectiveScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_sample" => Ok(Self::PerSample),
            "raw" => Ok(Self::Raw),
            other => Err(Error::validation(
                "objective_scaling",
                format!("expected per_sample or raw, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for ObjectiveScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PerSample => "per_sample",
            Self::Raw => "raw",
        })
    }
}

/// Per-call sample size of the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// Whole local data set: a zero-variance oracle.
    Full,
    Fixed(usize),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => f.write_str("full"),
            BatchSize::Fixed(b) => write!(f, "{b}"),
        }
    }
}

/// The sample `ξ` a node draws for one oracle call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sample {
    Full,
    /// Local sample indices, drawn uniformly with replacement.
    Indices(Vec<usize>),
}

impl Sample {
    pub fn draw(batch: BatchSize, available: usize, rng: &mut Rng) -> Result<Sample> {
        match batch {
            BatchSize::Full => Ok(Sample::Full),
            BatchSize::Fixed(b) => {
                if b == 0 || b > available {
                    return Err(Error::BatchTooLarge {
                        batch: b,
                        available,
                    });
                }
                Ok(Sample::Indices(
                    (0..b).map(|_| rng.random_range(0..available)).collect(),
                ))
            }
        }
    }

    fn check(&self, available: usize) -> Result<()> {
        if let Sample::Indices(idx) = self {
            if idx.is_empty() || idx.iter().any(|&i| i >= available) {
                return Err(Error::BatchTooLarge {
                    batch: idx.len(),
                    available,
                });
            }
        }
        Ok(())
    }
}

/// A decentralized problem `min (1/n) Σᵢ fᵢ(x)` over `St(d, r)`.
pub trait Problem: Sync {
    fn num_nodes(&self) -> usize;

    /// `(d, r)`
    fn dims(&self) -> (usize, usize);

    fn local_samples(&self, node: usize) -> usize;

    /// Unbiased estimate of `∇fᵢ(x)` from `sample`.
    fn euclidean_gradient(&self, node: usize, x: &StiefelPoint, sample: &Sample) -> Result<Mat>;

    fn riemannian_gradient(
        &self,
        node: usize,
        x: &StiefelPoint,
        sample: &Sample,
    ) -> Result<TangentVector> {
        let g = self.euclidean_gradient(node, x, sample)?;
        project_to_tangent(x, &g)
    }

    fn draw_sample(&self, node: usize, batch: BatchSize, rng: &mut Rng) -> Result<Sample> {
        Sample::draw(batch, self.local_samples(node), rng)
    }

    /// Reported objective at a common point.
    fn objective(&self, x: &StiefelPoint) -> Result<f64>;

    fn optimum(&self) -> Option<&StiefelPoint> {
        None
    }

    /// Fit against a known ground truth, for problems without a reference optimum.
    fn reference_fit(&self, _x: &StiefelPoint) -> Option<f64> {
        None
    }

    fn name(&self) -> &'static str;
}
