use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dprsrm::harness::{
    emit_plot_script, grid_search, parse_config_for, rate_check, run_experiment, ExperimentConfig,
    GridSpec, ProblemKind, SelectionMetric, DEFAULT_BETAS,
};
use dprsrm::solvers::Algorithm;
use dprsrm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "dprsrm",
    version,
    about = "Decentralized stochastic optimization on the Stiefel manifold"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    algo: Option<Algo>,
    /// Output directory for CSV traces and scripts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Dprsrm,
    Drsgd,
    Dprgd,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Dprsrm => Algorithm::Dprsrm,
            Algo::Drsgd => Algorithm::Drsgd,
            Algo::Dprgd => Algorithm::Dprgd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Grad,
    Dist,
    Objective,
}

#[derive(Subcommand)]
enum Command {
    /// PCA on a synthetic instance with a controlled spectrum.
    PcaSynthetic,
    /// PCA on an IDX3 image file.
    PcaIdx {
        #[arg(long)]
        train: PathBuf,
    },
    /// Low-rank matrix completion.
    Lrmc,
    /// Grid search over β̂ for the configured experiment.
    GridSearch {
        /// Comma-separated candidates.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "grad")]
        metric: Metric,
        /// Seeds per candidate, counted up from the master seed.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
    /// Log-log slope of the best stationarity over several iteration budgets.
    RateCheck {
        /// Comma-separated iteration counts.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Writes a gnuplot script for the given CSV traces.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn load(global: &Global, problem: Option<ProblemKind>) -> Result<ExperimentConfig> {
    let text = match &global.config {
        Some(path) => fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config_for(&text, problem)?;
    if let Some(seed) = global.seed {
        cfg.solver.seed = seed;
    }
    if let Some(algo) = global.algo {
        cfg.solver.algorithm = algo.into();
    }
    cfg.out = global.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(cfg: &ExperimentConfig) -> Result<()> {
    let out = run_experiment(cfg)?;
    println!("{}", out.summary);
    if let Some(path) = out.csv_path {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::PcaSynthetic => run_one(&load(g, Some(ProblemKind::PcaSynthetic))?),
        Command::PcaIdx { train } => run_one(&load(g, Some(ProblemKind::PcaIdx(train)))?),
        Command::Lrmc => run_one(&load(g, Some(ProblemKind::Lrmc))?),
        Command::GridSearch {
            betas,
            metric,
            seeds,
        } => {
            let cfg = load(g, None)?;
            let metric = match metric {
                Metric::Grad => SelectionMetric::FinalGradNorm,
                Metric::Dist => SelectionMetric::FinalDist,
                Metric::Objective => SelectionMetric::FinalObjective,
            };
            let seeds: Vec<u64> = (0..seeds).map(|i| cfg.seed() + i).collect();
            let spec = GridSpec::new(
                betas.unwrap_or_else(|| DEFAULT_BETAS.to_vec()),
                metric,
                seeds,
            );
            let result = grid_search(&cfg, &spec)?;
            for c in &result.candidates {
                println!("beta_hat={:e} score={:.6e}", c.beta, c.score);
            }
            println!("best beta_hat={:e}", result.best_beta);
            Ok(())
        }
        Command::RateCheck { ks, seeds } => {
            let cfg = load(g, None)?;
            let seeds: Vec<u64> = (0..seeds).map(|i| cfg.seed() + i).collect();
            let rc = rate_check(&cfg, &ks, &seeds)?;
            for (k, v) in rc.ks.iter().zip(&rc.min_grad) {
                println!("K={k} min_grad_norm_sq={v:.6e}");
            }
            println!("slope={:.4}", rc.slope);
            Ok(())
        }
        Command::Plot { csv } => {
            let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let path = dir.join("plot.gp");
            emit_plot_script(&csv, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
