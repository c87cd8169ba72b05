use rayon::prelude::*;

use super::estimator::{clip, momentum_estimator, tracking_update};
use super::{initial_point_and_streams, NodeState, SolverConfig, StackedState};
use crate::error::Result;
use crate::linalg::Mat;
use crate::manifold::{project_to_manifold, project_to_tangent, StiefelPoint};
use crate::network::{mix, MixingMatrix};
use crate::problems::Problem;
use crate::rng::Rng;

/// `x_{i,k+1} = P_M(Σⱼ w_ij x_{j,k} − α P_T(sᵢ))` for every node.
fn consensus_update(
    w: &MixingMatrix,
    points: &[StiefelPoint],
    s: &[Mat],
    alpha: f64,
) -> Result<Vec<StiefelPoint>> {
    let xs: Vec<Mat> = points.iter().map(|p| p.as_matrix().clone()).collect();
    let mixed = mix(w, &xs)?;
    mixed
        .into_par_iter()
        .zip(points.par_iter())
        .zip(s.par_iter())
        .map(|((m, x), si)| {
            let v = project_to_tangent(x, si)?;
            project_to_manifold(&(m - v.as_matrix() * alpha))
        })
        .collect()
}

/// Initial estimator and first consensus step from an explicit shared start `x0` and per-node oracle streams.
pub(crate) fn dprsrm_init_from<P: Problem + ?Sized>(
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
    x0: &StiefelPoint,
    rngs: Vec<Rng>,
) -> Result<StackedState> {
    let n = problem.num_nodes();
    x0.check_dims(&Mat::zeros(problem.dims().0, problem.dims().1))?;
    let grads: Vec<(Mat, Rng)> = rngs
        .into_par_iter()
        .enumerate()
        .map(|(i, mut rng)| {
            let xi = problem.draw_sample(i, cfg.batch, &mut rng)?;
            let g = problem.riemannian_gradient(i, x0, &xi)?.into_matrix();
            Ok((g, rng))
        })
        .collect::<Result<_>>()?;
    let s: Vec<Mat> = grads.iter().map(|(g, _)| g.clone()).collect();
    let starts = vec![x0.clone(); n];
    let next = consensus_update(w, &starts, &s, cfg.alpha)?;
    let nodes = grads
        .into_iter()
        .zip(next)
        .map(|((g, rng), x)| NodeState {
            x,
            x_prev: x0.clone(),
            d: g.clone(),
            s: g,
            rng,
        })
        .collect();
    Ok(StackedState {
        nodes,
        k: 1,
        sfo_batches: n as u64,
        grad_evals: n as u64,
    })
}

/// Draws the shared start and the node streams from `cfg.seed`, then takes the initial step.
pub fn dprsrm_init<P: Problem + ?Sized>(
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
) -> Result<StackedState> {
    let (d, r) = problem.dims();
    let (x0, rngs) = initial_point_and_streams(d, r, problem.num_nodes(), cfg.seed)?;
    dprsrm_init_from(problem, w, cfg, &x0, rngs)
}

/// One iteration: estimator, clipping, tracking and the projected consensus step.
pub fn dprsrm_step<P: Problem + ?Sized>(
    mut state: StackedState,
    problem: &P,
    w: &MixingMatrix,
    cfg: &SolverConfig,
) -> Result<StackedState> {
    let n = state.n();
    let d_new: Vec<Mat> = state
        .nodes
        .par_iter_mut()
        .enumerate()
        .map(|(i, node)| {
            let xi = problem.draw_sample(i, cfg.batch, &mut node.rng)?;
            let g_new = problem.riemannian_gradient(i, &node.x, &xi)?.into_matrix();
            let g_old = problem
                .riemannian_gradient(i, &node.x_prev, &xi)?
                .into_matrix();
            let q = momentum_estimator(&g_new, &g_old, &node.d, cfg.tau)?;
            Ok(clip(&q, cfg.clip_b))
        })
        .collect::<Result<_>>()?;

    let s_new = if cfg.tracking {
        let s_prev: Vec<Mat> = state.nodes.iter().map(|nd| nd.s.clone()).collect();
        let d_prev: Vec<Mat> = state.nodes.iter().map(|nd| nd.d.clone()).collect();
        tracking_update(w, &s_prev, &d_new, &d_prev)?
    } else {
        d_new.clone()
    };

    let points = state.points();
    let next = consensus_update(w, &points, &s_new, cfg.alpha)?;
    for (((node, x), d), s) in state.nodes.iter_mut().zip(next).zip(d_new).zip(s_new) {
        node.x_prev = std::mem::replace(&mut node.x, x);
        node.d = d;
        node.s = s;
    }
    state.k += 1;
    state.sfo_batches += n as u64;
    state.grad_evals += 2 * n as u64;
    Ok(state)
}
