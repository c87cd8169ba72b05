use rayon::prelude::*;

use super::config::{AlphaRule, ExperimentConfig};
use super::experiment::{build_experiment, run_on};
use crate::error::{Error, Result};
use crate::metrics::{NullSink, RunRecord};

/// The β̂ candidates used when none are given.
pub const DEFAULT_BETAS: [f64; 6] = [0.01, 0.05, 0.1, 0.5, 1.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMetric {
    FinalGradNorm,
    FinalDist,
    FinalObjective,
}

impl SelectionMetric {
    fn read(self, rec: &RunRecord) -> Result<f64> {
        match self {
            SelectionMetric::FinalGradNorm => Ok(rec.grad_norm_sq),
            SelectionMetric::FinalObjective => Ok(rec.objective),
            SelectionMetric::FinalDist => rec
                .dist_to_opt
                .ok_or_else(|| Error::validation("metric", "problem has no reference optimum")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub betas: Vec<f64>,
    pub metric: SelectionMetric,
    pub seeds: Vec<u64>,
}

impl GridSpec {
    pub fn new(betas: Vec<f64>, metric: SelectionMetric, seeds: Vec<u64>) -> Self {
        Self {
            betas,
            metric,
            seeds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub beta: f64,
    /// Seed mean of the metric; `+∞` if any run aborted.
    pub score: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best_beta: f64,
    pub candidates: Vec<CandidateScore>,
}

impl GridResult {
    pub fn best(&self) -> &CandidateScore {
        self.candidates
            .iter()
            .find(|c| c.beta == self.best_beta)
            .expect("best candidate is in the list")
    }
}

/// Final record of `cfg` run on its own seed, or `None` if the iterates left the tube.
pub fn final_record(cfg: &ExperimentConfig) -> Result<Option<RunRecord>> {
    let mut cfg = cfg.clone();
    cfg.solver.metric_every = cfg.solver.iterations.max(1);
    let exp = build_experiment(&cfg)?;
    match run_on(&exp, &cfg, &mut NullSink) {
        Ok((_, summary)) => Ok(Some(summary.last)),
        Err(e) if matches!(e.root(), Error::RankDeficient { .. } | Error::NonFinite) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs every `(β̂, seed)` pair and returns the candidate with the smallest seed-mean metric.
///
/// Ties go to the smaller β̂.
pub fn grid_search(cfg: &ExperimentConfig, grid: &GridSpec) -> Result<GridResult> {
    if grid.betas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.seeds.is_empty() {
        return Err(Error::validation("seeds", "need at least one seed"));
    }
    if let Some(b) = grid.betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::validation(
            "beta_hat",
            format!("candidate {b} is not positive"),
        ));
    }
    let jobs: Vec<(usize, u64)> = (0..grid.betas.len())
        .flat_map(|b| grid.seeds.iter().map(move |&s| (b, s)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(b, seed)| {
            let mut c = cfg.clone();
            c.beta_hat = grid.betas[b];
            c.solver.seed = seed;
            match final_record(&c)? {
                Some(rec) => {
                    let v = grid.metric.read(&rec)?;
                    Ok(if v.is_finite() { v } else { f64::INFINITY })
                }
                None => Ok(f64::INFINITY),
            }
        })
        .collect::<Result<_>>()?;

    let per = grid.seeds.len();
    let candidates: Vec<CandidateScore> = grid
        .betas
        .iter()
        .enumerate()
        .map(|(b, &beta)| {
            let per_seed = scores[b * per..(b + 1) * per].to_vec();
            let score = per_seed.iter().sum::<f64>() / per as f64;
            CandidateScore {
                beta,
                score,
                per_seed,
            }
        })
        .collect();
    let best = candidates
        .iter()
        .min_by(|a, b| a.score.total_cmp(&b.score).then(a.beta.total_cmp(&b.beta)))
        .expect("nonempty grid");
    Ok(GridResult {
        best_beta: best.beta,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCheck {
    pub ks: Vec<usize>,
    /// Seed mean of `min_k grad_norm_sq` for each K.
    pub min_grad: Vec<f64>,
    pub slope: f64,
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct MinGrad(f64);

impl crate::metrics::MetricsSink for MinGrad {
    fn record(&mut self, rec: RunRecord) -> Result<()> {
        self.0 = self.0.min(rec.grad_norm_sq);
        Ok(())
    }
}

/// Log-log slope of the best stationarity against K under the step rule
/// `α = β̂·K^{−1/3}`, `τ = K^{−2/3}`.
pub fn rate_check(cfg: &ExperimentConfig, ks: &[usize], seeds: &[u64]) -> Result<RateCheck> {
    if ks.len() < 2 {
        return Err(Error::InsufficientPoints);
    }
    if seeds.is_empty() {
        return Err(Error::validation("seeds", "need at least one seed"));
    }
    let jobs: Vec<(usize, u64)> = ks
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let mins: Vec<f64> = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let mut c = cfg.clone();
            c.alpha_rule = AlphaRule::CubeRoot;
            c.solver.iterations = k;
            c.solver.seed = seed;
            c.solver.metric_every = 1;
            let exp = build_experiment(&c)?;
            let mut sink = MinGrad(f64::INFINITY);
            run_on(&exp, &c, &mut sink)?;
            Ok(sink.0)
        })
        .collect::<Result<_>>()?;
    let per = seeds.len();
    let min_grad: Vec<f64> = (0..ks.len())
        .map(|i| mins[i * per..(i + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let lx: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ly: Vec<f64> = min_grad.iter().map(|v| v.ln()).collect();
    Ok(RateCheck {
        ks: ks.to_vec(),
        min_grad,
        slope: fit_slope(&lx, &ly),
    })
}
