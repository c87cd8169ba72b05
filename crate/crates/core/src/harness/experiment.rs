use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, ProblemKind};
use crate::error::{Error, Result};
use crate::manifold::induced_mean;
use crate::metrics::{MetricsSink, RunRecord};
use crate::network::{build_topology, metropolis_weights, Graph, MixingMatrix};
use crate::problems::{
    gen_lrmc, gen_synthetic_pca, load_idx_images, split_rows, write_snapshot, PcaInstance, Problem,
    Snapshot,
};
use crate::rng::{Domain, SeedFan};
use crate::solvers::{run, StackedState};

pub const CSV_HEADER: &str =
    "k,consensus_error,grad_norm_sq,objective,dist_to_opt,sfo_batches,wall_ns";

/// Instance, graph and mixing matrix for one config, all derived from its seed.
pub struct Experiment {
    pub problem: Box<dyn Problem>,
    pub graph: Graph,
    pub w: MixingMatrix,
    /// Serialized instance for generated problems; `None` for file-backed data.
    pub snapshot: Option<Snapshot>,
}

pub fn build_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let fan = SeedFan::new(cfg.seed());
    let mut inst_rng = fan.stream(Domain::Instance, 0);
    let (problem, snapshot): (Box<dyn Problem>, _) = match &cfg.problem {
        ProblemKind::PcaSynthetic => {
            let inst = gen_synthetic_pca(
                cfg.n,
                cfg.m_per_node,
                cfg.d,
                cfg.r,
                cfg.gamma,
                cfg.scaling,
                &mut inst_rng,
            )?;
            let snap = inst.to_snapshot();
            (Box::new(inst), Some(snap))
        }
        ProblemKind::PcaIdx(path) => {
            let data = load_idx_images(path)?;
            let split = split_rows(&data, cfg.n, &mut fan.stream(Domain::Shuffle, 0))?;
            let inst = PcaInstance::from_shards(split.shards, cfg.r, cfg.scaling, true)?;
            (Box::new(inst), None)
        }
        ProblemKind::Lrmc => {
            let inst = gen_lrmc(cfg.n, cfg.d, cfg.t, cfg.r, cfg.scaling, &mut inst_rng)?;
            let snap = inst.to_snapshot();
            (Box::new(inst), Some(snap))
        }
    };
    let graph = build_topology(cfg.topology, cfg.n, &mut fan.stream(Domain::Topology, 0))?;
    let w = metropolis_weights(&graph)?;
    Ok(Experiment {
        problem,
        graph,
        w,
        snapshot,
    })
}

/// Final state of a run, as printed on the summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub problem: &'static str,
    pub algorithm: String,
    pub seed: u64,
    pub alpha: f64,
    pub sigma2: f64,
    pub last: RunRecord,
    pub sfo_batches: u64,
    pub grad_evals: u64,
    /// Relative fit to the ground truth, for problems that have one.
    pub reference_fit: Option<f64>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "problem={} algorithm={} seed={} alpha={:.6e} sigma2={:.6} k={} consensus_error={:.6e} grad_norm_sq={:.6e} objective={:.10e}",
            self.problem,
            self.algorithm,
            self.seed,
            self.alpha,
            self.sigma2,
            self.last.k,
            self.last.consensus_error,
            self.last.grad_norm_sq,
            self.last.objective,
        )?;
        if let Some(d) = self.last.dist_to_opt {
            write!(f, " dist_to_opt={d:.6e}")?;
        }
        if let Some(fit) = self.reference_fit {
            write!(f, " reference_fit={fit:.6e}")?;
        }
        write!(
            f,
            " sfo_batches={} grad_evals={}",
            self.sfo_batches, self.grad_evals
        )
    }
}

pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    pub state: StackedState,
    /// Where the CSV went, when `cfg.out` was set. The edge list
    /// (`.graph`) and instance snapshot (`.snap`) sit next to it.
    pub csv_path: Option<PathBuf>,
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_row(rec: &RunRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        rec.k,
        fmt_float(rec.consensus_error),
        fmt_float(rec.grad_norm_sq),
        fmt_float(rec.objective),
        rec.dist_to_opt.map(fmt_float).unwrap_or_default(),
        rec.sfo_batches,
        rec.wall_ns
    )
}

pub fn to_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&csv_row(rec));
        out.push('\n');
    }
    out
}

/// File name used under `--out`.
pub fn csv_file_name(cfg: &ExperimentConfig) -> String {
    let problem = match cfg.problem {
        ProblemKind::PcaSynthetic => "pca_synthetic",
        ProblemKind::PcaIdx(_) => "pca_idx",
        ProblemKind::Lrmc => "lrmc",
    };
    format!(
        "{problem}_{}_{}_seed{}.csv",
        cfg.solver.algorithm,
        cfg.topology,
        cfg.seed()
    )
}

/// Runs `cfg` on a prebuilt experiment, streaming records into `sink`.
pub fn run_on(
    exp: &Experiment,
    cfg: &ExperimentConfig,
    sink: &mut dyn MetricsSink,
) -> Result<(StackedState, Summary)> {
    let solver = cfg.solver_config();
    let mut last = LastSeen {
        inner: sink,
        last: None,
    };
    let state = run(exp.problem.as_ref(), &exp.w, &solver, &mut last)?;
    let last_rec = last.last.expect("the final iteration is always recorded");
    let reference_fit = exp.problem.reference_fit(&induced_mean(&state.points())?);
    let summary = Summary {
        problem: exp.problem.name(),
        algorithm: solver.algorithm.to_string(),
        seed: solver.seed,
        alpha: solver.alpha,
        sigma2: exp.w.sigma2(),
        last: last_rec,
        sfo_batches: state.sfo_batches,
        grad_evals: state.grad_evals,
        reference_fit,
    };
    Ok((state, summary))
}

struct LastSeen<'a> {
    inner: &'a mut dyn MetricsSink,
    last: Option<RunRecord>,
}

impl MetricsSink for LastSeen<'_> {
    fn record(&mut self, rec: RunRecord) -> Result<()> {
        self.last = Some(rec.clone());
        self.inner.record(rec)
    }
}

/// Builds the instance, runs the solver and writes the CSV when `cfg.out` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let exp = build_experiment(cfg)?;
    let mut records = Vec::new();
    let (state, summary) = run_on(&exp, cfg, &mut records)?;
    let csv_path = match &cfg.out {
        Some(dir) => {
            let path = write_csv(dir, &csv_file_name(cfg), &records)?;
            let graph_path = path.with_extension("graph");
            fs::write(&graph_path, exp.graph.to_edge_list())
                .map_err(|e| Error::io(&graph_path, e))?;
            if let Some(snap) = &exp.snapshot {
                write_snapshot(path.with_extension("snap"), snap)?;
            }
            Some(path)
        }
        None => None,
    };
    Ok(RunOutput {
        records,
        summary,
        state,
        csv_path,
    })
}

pub fn write_csv(dir: &Path, name: &str, records: &[RunRecord]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, to_csv(records)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
