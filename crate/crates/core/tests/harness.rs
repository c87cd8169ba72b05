use std::path::Path;
use std::process::Command;

use dprsrm::harness::{
    build_experiment, csv_file_name, final_record, grid_search, parse_config, plot_script,
    rate_check, run_experiment, AlphaRule, ExperimentConfig, GridSpec, ProblemKind,
    SelectionMetric, CSV_HEADER,
};
use dprsrm::linalg::Mat;
use dprsrm::manifold::{euclidean_mean, gaussian_matrix, StiefelPoint};
use dprsrm::network::{build_topology, metropolis_weights, Topology};
use dprsrm::problems::{BatchSize, ObjectiveScaling, PcaInstance};
use dprsrm::rng::seeded;
use dprsrm::solvers::{init, initial_point_and_streams, step, Algorithm, SolverConfig};
use dprsrm::Error;

fn preset_text(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

fn small(iterations: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.m_per_node = 100;
    cfg.solver.iterations = iterations;
    cfg
}

#[test]
fn pca_preset_carries_experiment_values() {
    let cfg = parse_config(&preset_text("pca.cfg")).unwrap();
    assert_eq!((cfg.n, cfg.d, cfg.r), (8, 10, 5));
    assert_eq!(cfg.gamma, 0.8);
    assert_eq!(cfg.m_per_node, 1000);
    let s = cfg.solver_config();
    assert_eq!(s.iterations, 2000);
    assert_eq!(s.batch, BatchSize::Fixed(10));
    assert_eq!(s.tau, 0.999);
    assert_eq!(s.clip_b, 1e8);
    assert_eq!(s.algorithm, Algorithm::Dprsrm);
}

#[test]
fn other_presets_parse() {
    let lrmc = parse_config(&preset_text("lrmc.cfg")).unwrap();
    assert_eq!((lrmc.d, lrmc.r, lrmc.t), (50, 10, 1000));
    let mnist = parse_config(&preset_text("mnist.cfg")).unwrap();
    assert_eq!(mnist.solver.batch, BatchSize::Fixed(1500));
}

fn masked_csv(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| match l.rsplit_once(',') {
            Some((head, _)) => head.to_string(),
            None => l.to_string(),
        })
        .collect()
}

#[test]
fn csv_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(25);
    let mut paths = Vec::new();
    for sub in ["a", "b"] {
        cfg.out = Some(dir.path().join(sub));
        let out = run_experiment(&cfg).unwrap();
        paths.push(out.csv_path.unwrap());
    }
    assert!(paths[0].ends_with(csv_file_name(&cfg)));
    let (a, b) = (masked_csv(&paths[0]), masked_csv(&paths[1]));
    assert_eq!(a, b);
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(text.lines().count(), 1 + 26);
    assert!(paths[0].with_extension("graph").exists());
}

#[test]
fn grid_with_one_candidate_returns_it() {
    let cfg = small(20);
    let grid = GridSpec::new(vec![0.5], SelectionMetric::FinalGradNorm, vec![0]);
    let res = grid_search(&cfg, &grid).unwrap();
    assert_eq!(res.best_beta, 0.5);
    assert_eq!(res.candidates.len(), 1);
}

#[test]
fn aborted_candidates_lose() {
    let mut cfg = ExperimentConfig::for_problem(ProblemKind::Lrmc);
    (cfg.d, cfg.r, cfg.t) = (20, 3, 80);
    cfg.solver.iterations = 5;
    // α·gradient overflows under raw scaling
    cfg.scaling = ObjectiveScaling::Raw;
    let grid = GridSpec::new(
        vec![f64::MAX, 1e-3],
        SelectionMetric::FinalGradNorm,
        vec![0, 1],
    );
    let res = grid_search(&cfg, &grid).unwrap();
    assert_eq!(res.best_beta, 1e-3);
    assert!(res
        .candidates
        .iter()
        .any(|c| c.beta == f64::MAX && c.score == f64::INFINITY));
}

#[test]
fn grid_picks_the_argmin_of_mean_scores() {
    let mut cfg = small(60);
    cfg.scaling = ObjectiveScaling::Raw;
    let betas = vec![0.01, 0.1, 1.0];
    let seeds = vec![0, 1, 2];
    let res = grid_search(
        &cfg,
        &GridSpec::new(betas.clone(), SelectionMetric::FinalGradNorm, seeds.clone()),
    )
    .unwrap();
    let mut best = (f64::INFINITY, 0.0);
    for &beta in &betas {
        let mut total = 0.0;
        for &seed in &seeds {
            let mut c = cfg.clone();
            c.beta_hat = beta;
            c.solver.seed = seed;
            total += final_record(&c).unwrap().unwrap().grad_norm_sq;
        }
        let score = total / seeds.len() as f64;
        if score < best.0 {
            best = (score, beta);
        }
    }
    assert_eq!(res.best_beta, best.1);
    assert!((res.best().score - best.0).abs() <= 1e-12 * best.0);
}

#[test]
fn zero_variance_rate_is_at_least_linear() {
    let mut cfg = ExperimentConfig::default();
    cfg.scaling = ObjectiveScaling::Raw;
    cfg.solver.batch = BatchSize::Full;
    let rc = rate_check(&cfg, &[1000, 8000], &[0, 1]).unwrap();
    assert!(rc.slope <= -0.9, "slope {}", rc.slope);
}

#[test]
fn rate_check_rejects_single_budget() {
    let cfg = small(10);
    let err = rate_check(&cfg, &[100], &[0]).unwrap_err();
    assert!(matches!(err, Error::InsufficientPoints { .. }));
}

#[test]
fn plot_script_names_every_input() {
    let dir = tempfile::tempdir().unwrap();
    let paths = vec![dir.path().join("a.csv"), dir.path().join("b.csv")];
    let script = plot_script(&paths).unwrap();
    for p in &paths {
        assert!(script.contains(&p.display().to_string()));
    }
}

#[test]
fn mean_iterate_ignores_node_stream_order() {
    let n = 4;
    let mut rng = seeded(3);
    let shard = gaussian_matrix(40, 6, &mut rng);
    let inst =
        PcaInstance::from_shards(vec![shard; n], 2, ObjectiveScaling::PerSample, false).unwrap();
    let graph = build_topology(Topology::Complete, n, &mut rng).unwrap();
    let w = metropolis_weights(&graph).unwrap();
    let cfg = SolverConfig {
        alpha: 0.05,
        iterations: 30,
        batch: BatchSize::Fixed(5),
        ..SolverConfig::default()
    };
    let (x0, streams) = initial_point_and_streams(6, 2, n, 11).unwrap();
    let mut reversed = streams.clone();
    reversed.reverse();
    let mean_after = |rngs| -> Mat {
        let mut st = init(&inst, &w, &cfg, &x0, rngs).unwrap();
        for _ in 0..cfg.iterations {
            st = step(st, &inst, &w, &cfg).unwrap();
        }
        let pts: Vec<StiefelPoint> = st.points();
        euclidean_mean(&pts).unwrap()
    };
    let a = mean_after(streams);
    let b = mean_after(reversed);
    assert!((a - b).norm() <= 1e-12);
}

#[test]
fn experiment_alpha_follows_rule() {
    let mut cfg = small(100);
    cfg.alpha_rule = AlphaRule::Fixed(0.25);
    let exp = build_experiment(&cfg).unwrap();
    assert_eq!(exp.w.n(), cfg.n);
    assert_eq!(cfg.solver_config().alpha, 0.25);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dprsrm"))
}

#[test]
fn cli_runs_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "m_per_node = 100\niterations = 20\n").unwrap();
    let out = cli()
        .args(["pca-synthetic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .args(["--seed", "4", "--algo", "drsgd"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = dir.path().join("pca_synthetic_drsgd_ring_seed4.csv");
    assert!(csv.exists());
    let out = cli()
        .arg("plot")
        .arg(&csv)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("plot.gp").exists());
}

#[test]
fn cli_reports_bad_config_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "alpha = -1\n").unwrap();
    let out = cli()
        .args(["pca-synthetic", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn cli_rate_check_needs_two_budgets() {
    let out = cli().args(["rate-check", "--ks", "100"]).output().unwrap();
    assert!(!out.status.success());
}
