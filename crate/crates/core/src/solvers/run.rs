use std::time::Instant;

use super::baselines::baseline_init;
use super::dprsrm::dprsrm_init_from;
use super::{dprgd_step, dprsrm_step, drsgd_step, initial_point_and_streams};
use super::{Algorithm, SolverConfig, StackedState};
use crate::error::{Error, Result};
use crate::manifold::StiefelPoint;
use crate::metrics::{evaluate, MetricsSink, RunRecord};
use crate::network::MixingMatrix;
use crate::problems::Problem;
use crate::rng::Rng;

fn check_sizes<P: Problem + ?Sized>(problem: &P, w: &MixingMatrix) -> Result<()> {
    if problem.num_nodes() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: (problem.num_nodes(), problem.num_nodes()),
            found: (w.n(), w.n()),
        });
    }
    Ok(())
}

/// Initialization for `cfg.algorithm` from an explicit start.
pub fn init<P: Problem + ?Sized>(
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
    x0: &StiefelPoint,
    rngs: Vec<Rng>,
) -> Result<StackedState> {
    cfg.validate()?;
    check_sizes(problem, w)?;
    if rngs.len() != problem.num_nodes() {
        return Err(Error::InvalidDims(format!(
            "{} oracle streams for {} nodes",
            rngs.len(),
            problem.num_nodes()
        )));
    }
    match cfg.algorithm {
        Algorithm::Dprsrm => dprsrm_init_from(problem, w, cfg, x0, rngs),
        Algorithm::Drsgd | Algorithm::Dprgd => baseline_init(problem, w, cfg, x0, rngs),
    }
}

/// One iteration of `cfg.algorithm`.
pub fn step<P: Problem + ?Sized>(
    state: StackedState,
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
) -> Result<StackedState> {
    match cfg.algorithm {
        Algorithm::Dprsrm => dprsrm_step(state, problem, w, cfg),
        Algorithm::Drsgd => drsgd_step(state, problem, w, cfg),
        Algorithm::Dprgd => dprgd_step(state, problem, w, cfg),
    }
}

fn emit<P: Problem + ?Sized>(
    sink: &mut dyn MetricsSink,
    problem: &P,
    state: &StackedState,
    k: usize,
    started: Instant,
) -> Result<()> {
    let ev = evaluate(problem, &state.points())?;
    sink.record(RunRecord {
        k,
        consensus_error: ev.consensus_error,
        grad_norm_sq: ev.grad_norm_sq,
        objective: ev.objective,
        dist_to_opt: ev.dist_to_opt,
        sfo_batches: state.sfo_batches,
        wall_ns: started.elapsed().as_nanos() as u64,
    })
}

/// Initialization followed by `cfg.iterations` steps.
///
/// Record `k = 0` follows initialization and record `k = j` follows step `j`.
/// Records are emitted when `k % metric_every == 0` and always for the last one.
pub fn run<P: Problem + ?Sized>(
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
    sink: &mut dyn MetricsSink,
) -> Result<StackedState> {
    cfg.validate()?;
    let (d, r) = problem.dims();
    let (x0, rngs) = initial_point_and_streams(d, r, problem.num_nodes(), cfg.seed)?;
    let started = Instant::now();
    let due = |k: usize| k.is_multiple_of(cfg.metric_every) || k == cfg.iterations;

    let mut state = init(problem, w, cfg, &x0, rngs).map_err(|e| e.at_iteration(0))?;
    if due(0) {
        emit(sink, problem, &state, 0, started).map_err(|e| e.at_iteration(0))?;
    }
    for k in 1..=cfg.iterations {
        state = step(state, problem, w, cfg).map_err(|e| e.at_iteration(k))?;
        if due(k) {
            emit(sink, problem, &state, k, started).map_err(|e| e.at_iteration(k))?;
        }
    }
    Ok(state)
}
