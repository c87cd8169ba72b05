//! Stationarity and consensus diagnostics.
//!
//! These use full local gradients. The solvers never do; the metrics layer is
//! allowed to because it only observes.

use crate::error::Result;
use crate::linalg::Mat;
use crate::manifold::{induced_mean, procrustes_distance, project_to_tangent, StiefelPoint};
use crate::problems::{Problem, Sample};

/// One row of a run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub k: usize,
    pub consensus_error: f64,
    pub grad_norm_sq: f64,
    pub objective: f64,
    pub dist_to_opt: Option<f64>,
    pub sfo_batches: u64,
    pub wall_ns: u64,
}

pub trait MetricsSink {
    fn record(&mut self, rec: RunRecord) -> Result<()>;
}

impl MetricsSink for Vec<RunRecord> {
    fn record(&mut self, rec: RunRecord) -> Result<()> {
        self.push(rec);
        Ok(())
    }
}

/// Discards every record.
pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _rec: RunRecord) -> Result<()> {
        Ok(())
    }
}

/// Keeps only the most recent record.
#[derive(Default)]
pub struct LastRecord(pub Option<RunRecord>);

impl MetricsSink for LastRecord {
    fn record(&mut self, rec: RunRecord) -> Result<()> {
        self.0 = Some(rec);
        Ok(())
    }
}

/// `(1/n) Σᵢ ‖xᵢ − x̄‖²` with `x̄` the induced mean.
pub fn consensus_error(points: &[StiefelPoint]) -> Result<f64> {
    let mean = induced_mean(points)?;
    Ok(spread_around(points, &mean))
}

fn spread_around(points: &[StiefelPoint], mean: &StiefelPoint) -> f64 {
    points
        .iter()
        .map(|p| (p.as_matrix() - mean.as_matrix()).norm_squared())
        .sum::<f64>()
        / points.len() as f64
}

/// `‖grad f(x̄)‖²` for `f = (1/n) Σ fᵢ` at the induced mean.
pub fn stationarity<P: Problem + ?Sized>(problem: &P, points: &[StiefelPoint]) -> Result<f64> {
    let mean = induced_mean(points)?;
    gradient_norm_sq_at(problem, &mean)
}

pub fn gradient_norm_sq_at<P: Problem + ?Sized>(problem: &P, x: &StiefelPoint) -> Result<f64> {
    let n = problem.num_nodes();
    let mut sum = Mat::zeros(x.d(), x.r());
    for i in 0..n {
        sum += problem.euclidean_gradient(i, x, &Sample::Full)?;
    }
    let grad = project_to_tangent(x, &(sum / n as f64))?;
    Ok(grad.as_matrix().norm_squared())
}

/// Procrustes distance from the induced mean to `xstar`.
pub fn distance_to_optimum(points: &[StiefelPoint], xstar: &StiefelPoint) -> Result<f64> {
    procrustes_distance(&induced_mean(points)?, xstar)
}

/// All per-iteration quantities, sharing one induced-mean computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub consensus_error: f64,
    pub grad_norm_sq: f64,
    pub objective: f64,
    pub dist_to_opt: Option<f64>,
    pub mean: StiefelPoint,
}

pub fn evaluate<P: Problem + ?Sized>(problem: &P, points: &[StiefelPoint]) -> Result<Evaluation> {
    let mean = induced_mean(points)?;
    let dist_to_opt = match problem.optimum() {
        Some(opt) => Some(procrustes_distance(&mean, opt)?),
        None => None,
    };
    Ok(Evaluation {
        consensus_error: spread_around(points, &mean),
        grad_norm_sq: gradient_norm_sq_at(problem, &mean)?,
        objective: problem.objective(&mean)?,
        dist_to_opt,
        mean,
    })
}
