//! Decentralized solvers run in synchronous rounds over a mixing matrix.

mod baselines;
mod dprsrm;
mod estimator;
mod run;

pub use baselines::{baseline_init, dprgd_step, drsgd_step};
pub use dprsrm::{dprsrm_init, dprsrm_step};
pub use estimator::{clip, momentum_estimator, tracking_update};
pub use run::{init, run, step};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::{random_stiefel, StiefelPoint};
use crate::problems::BatchSize;
use crate::rng::{Domain, Rng, SeedFan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Clipped hybrid-momentum estimator with gradient tracking and projected consensus.
    Dprsrm,
    /// Riemannian SGD with tangent-space consensus and polar retraction.
    Drsgd,
    /// Projected consensus step with a plain stochastic gradient.
    Dprgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Dprsrm, Algorithm::Drsgd, Algorithm::Dprgd];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dprsrm => "dprsrm",
            Algorithm::Drsgd => "drsgd",
            Algorithm::Dprgd => "dprgd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dprsrm" => Ok(Algorithm::Dprsrm),
            "drsgd" => Ok(Algorithm::Drsgd),
            "dprgd" => Ok(Algorithm::Dprgd),
            other => Err(Error::validation(
                "algorithm",
                format!("expected dprsrm, drsgd or dprgd, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub tau: f64,
    pub clip_b: f64,
    pub iterations: usize,
    pub batch: BatchSize,
    /// Gossip rounds per iteration for the baselines; DPRSRM always uses one.
    pub consensus_rounds: usize,
    /// Gradient tracking for DPRSRM. Without it `s ≡ d`.
    pub tracking: bool,
    /// Emit a record every this many iterations (the last iteration is always recorded).
    pub metric_every: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Dprsrm,
            alpha: 1.0 / (2000f64).sqrt(),
            tau: 0.999,
            clip_b: 1e8,
            iterations: 2000,
            batch: BatchSize::Fixed(10),
            consensus_rounds: 1,
            tracking: true,
            metric_every: 1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::validation(
                "alpha",
                format!("must be positive, got {}", self.alpha),
            ));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::validation(
                "tau",
                format!("must lie in [0, 1], got {}", self.tau),
            ));
        }
        if self.clip_b.is_nan() || self.clip_b <= 0.0 {
            return Err(Error::validation(
                "clip_b",
                format!("must be positive, got {}", self.clip_b),
            ));
        }
        if self.consensus_rounds == 0 {
            return Err(Error::validation("consensus_rounds", "must be at least 1"));
        }
        if self.metric_every == 0 {
            return Err(Error::validation("metric_every", "must be at least 1"));
        }
        if self.batch == BatchSize::Fixed(0) {
            return Err(Error::validation("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Per-node algorithm memory.
#[derive(Debug, Clone)]
pub struct NodeState {
    /// `x_{i,k}`
    pub x: StiefelPoint,
    /// `x_{i,k−1}`
    pub x_prev: StiefelPoint,
    /// Clipped estimator `d_{i,k}`.
    pub d: Mat,
    /// Tracker `s_{i,k}`.
    pub s: Mat,
    pub rng: Rng,
}

#[derive(Debug, Clone)]
pub struct StackedState {
    pub nodes: Vec<NodeState>,
    /// Number of completed updates; 1 after initialization.
    pub k: usize,
    /// Sample batches drawn across all nodes.
    pub sfo_batches: u64,
    /// Stochastic gradient evaluations across all nodes.
    pub grad_evals: u64,
}

impl StackedState {
    pub fn points(&self) -> Vec<StiefelPoint> {
        self.nodes.iter().map(|n| n.x.clone()).collect()
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// `(1/n) Σᵢ sᵢ − (1/n) Σᵢ dᵢ`
    pub fn tracking_gap(&self) -> f64 {
        let first = &self.nodes[0];
        let mut acc = Mat::zeros(first.s.nrows(), first.s.ncols());
        for node in &self.nodes {
            acc += &node.s;
            acc -= &node.d;
        }
        acc.norm() / self.nodes.len() as f64
    }
}

/// Shared initial point and independent per-node oracle streams from `seed`.
pub fn initial_point_and_streams(
    d: usize,
    r: usize,
    n: usize,
    seed: u64,
) -> Result<(StiefelPoint, Vec<Rng>)> {
    let fan = SeedFan::new(seed);
    let x0 = random_stiefel(d, r, &mut fan.stream(Domain::InitialPoint, 0))?;
    Ok((x0, fan.node_streams(n)))
}
