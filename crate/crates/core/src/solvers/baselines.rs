use rayon::prelude::*;

use super::{NodeState, SolverConfig, StackedState};
use crate::error::Result;
use crate::linalg::Mat;
use crate::manifold::{project_to_manifold, project_to_tangent, StiefelPoint};
use crate::network::{mix_rounds, MixingMatrix};
use crate::problems::Problem;
use crate::rng::Rng;

#[derive(Clone, Copy)]
enum Update {
    /// `P_M(Σⱼ w_ij xⱼ − α vᵢ)`
    Projection,
    /// `polar(xᵢ + P_T(Σⱼ w_ij xⱼ − xᵢ) − α vᵢ)`
    Retraction,
}

fn baseline_step<P: Problem + ?Sized>(
    mut state: StackedState,
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
    update: Update,
) -> Result<StackedState> {
    let n = state.n();
    let xs: Vec<Mat> = state
        .nodes
        .iter()
        .map(|nd| nd.x.as_matrix().clone())
        .collect();
    let mixed = mix_rounds(w, &xs, cfg.consensus_rounds)?;
    let results: Vec<(StiefelPoint, Mat)> = state
        .nodes
        .par_iter_mut()
        .zip(mixed)
        .enumerate()
        .map(|(i, (node, m))| {
            let xi = problem.draw_sample(i, cfg.batch, &mut node.rng)?;
            let g = problem.riemannian_gradient(i, &node.x, &xi)?.into_matrix();
            let v = project_to_tangent(&node.x, &g)?;
            let target = match update {
                Update::Projection => m - v.as_matrix() * cfg.alpha,
                Update::Retraction => {
                    let toward = project_to_tangent(&node.x, &(m - node.x.as_matrix()))?;
                    node.x.as_matrix() + toward.as_matrix() - v.as_matrix() * cfg.alpha
                }
            };
            Ok((project_to_manifold(&target)?, g))
        })
        .collect::<Result<_>>()?;
    for (node, (x, g)) in state.nodes.iter_mut().zip(results) {
        node.x_prev = std::mem::replace(&mut node.x, x);
        node.d = g.clone();
        node.s = g;
    }
    state.k += 1;
    state.sfo_batches += n as u64;
    state.grad_evals += n as u64;
    Ok(state)
}

/// Decentralized Riemannian SGD: tangent-space consensus plus a stochastic
/// gradient step, retracted by the polar factor.
pub fn drsgd_step<P: Problem + ?Sized>(
    state: StackedState,
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
) -> Result<StackedState> {
    baseline_step(state, problem, w, cfg, Update::Retraction)
}

/// Decentralized projected Riemannian gradient descent with a stochastic gradient.
pub fn dprgd_step<P: Problem + ?Sized>(
    state: StackedState,
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
) -> Result<StackedState> {
    baseline_step(state, problem, w, cfg, Update::Projection)
}

/// Every node at `x0` with zeroed estimators; no iteration taken yet.
pub(crate) fn resting_state(x0: &StiefelPoint, rngs: Vec<Rng>) -> StackedState {
    let (d, r) = x0.dims();
    StackedState {
        nodes: rngs
            .into_iter()
            .map(|rng| NodeState {
                x: x0.clone(),
                x_prev: x0.clone(),
                d: Mat::zeros(d, r),
                s: Mat::zeros(d, r),
                rng,
            })
            .collect(),
        k: 0,
        sfo_batches: 0,
        grad_evals: 0,
    }
}

/// First baseline iterate: one ordinary step from the shared start.
pub fn baseline_init<P: Problem + ?Sized>(
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
    x0: &StiefelPoint,
    rngs: Vec<Rng>,
) -> Result<StackedState> {
    let state = resting_state(x0, rngs);
    match cfg.algorithm {
        super::Algorithm::Drsgd => drsgd_step(state, problem, w, cfg),
        _ => dprgd_step(state, problem, w, cfg),
    }
}
