use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::Topology;
use crate::problems::{BatchSize, ObjectiveScaling};
use crate::solvers::{Algorithm, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    PcaSynthetic,
    /// PCA on an IDX3 image file, rows split over the nodes.
    PcaIdx(PathBuf),
    Lrmc,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemKind::PcaSynthetic => f.write_str("pca_synthetic"),
            ProblemKind::PcaIdx(p) => write!(f, "pca_idx({})", p.display()),
            ProblemKind::Lrmc => f.write_str("lrmc"),
        }
    }
}

/// How the step size is derived from `β̂` and `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Fixed(f64),
    /// `α = β̂/√K`
    SqrtK,
    /// `α = β̂/c`
    Divide(f64),
    /// `α = β̂·K^{−1/3}` and `τ = K^{−2/3}`.
    CubeRoot,
}

impl AlphaRule {
    pub fn alpha(self, beta_hat: f64, iterations: usize) -> f64 {
        let k = iterations.max(1) as f64;
        match self {
            AlphaRule::Fixed(a) => a,
            AlphaRule::SqrtK => beta_hat / k.sqrt(),
            AlphaRule::Divide(c) => beta_hat / c,
            AlphaRule::CubeRoot => beta_hat * k.powf(-1.0 / 3.0),
        }
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaRule::Fixed(_) => f.write_str("fixed"),
            AlphaRule::SqrtK => f.write_str("sqrt_k"),
            AlphaRule::Divide(c) => write!(f, "divide({c})"),
            AlphaRule::CubeRoot => f.write_str("cube_root"),
        }
    }
}

/// One fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub n: usize,
    /// Ambient dimension. Ignored for `pca_idx`, where the file decides.
    pub d: usize,
    pub r: usize,
    pub gamma: f64,
    pub m_per_node: usize,
    /// LRMC column count.
    pub t: usize,
    pub topology: Topology,
    pub alpha_rule: AlphaRule,
    pub beta_hat: f64,
    pub scaling: ObjectiveScaling,
    /// Solver settings; `alpha` (and `tau` under the cube-root rule) are
    /// overwritten by [`ExperimentConfig::solver_config`].
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_problem(ProblemKind::PcaSynthetic)
    }
}

impl ExperimentConfig {
    /// Defaults for `problem`: n = 8 on a ring, K = 2000, batch 10, τ = 0.999,
    /// B = 1e8 and α = β̂/√K with β̂ = 1.
    pub fn for_problem(problem: ProblemKind) -> Self {
        let (d, r) = match problem {
            ProblemKind::Lrmc => (50, 10),
            ProblemKind::PcaIdx(_) => (784, 5),
            ProblemKind::PcaSynthetic => (10, 5),
        };
        Self {
            problem,
            n: 8,
            d,
            r,
            gamma: 0.8,
            m_per_node: 1000,
            t: 1000,
            topology: Topology::Ring,
            alpha_rule: AlphaRule::SqrtK,
            beta_hat: 1.0,
            scaling: ObjectiveScaling::PerSample,
            solver: SolverConfig::default(),
            out: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.solver.seed
    }

    /// The solver settings with the step-size rule applied.
    pub fn solver_config(&self) -> SolverConfig {
        let mut s = self.solver.clone();
        s.alpha = self.alpha_rule.alpha(self.beta_hat, s.iterations);
        if self.alpha_rule == AlphaRule::CubeRoot {
            s.tau = (s.iterations.max(1) as f64).powf(-2.0 / 3.0);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n", "must be at least 1"));
        }
        if self.r == 0 {
            return Err(Error::validation("r", "must be at least 1"));
        }
        if !matches!(self.problem, ProblemKind::PcaIdx(_)) && self.r > self.d {
            return Err(Error::validation(
                "r",
                format!("must not exceed d = {}", self.d),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation("gamma", "must lie in (0, 1)"));
        }
        if self.m_per_node == 0 {
            return Err(Error::validation("m_per_node", "must be positive"));
        }
        if self.problem == ProblemKind::Lrmc {
            if self.t == 0 || !self.t.is_multiple_of(self.n) {
                return Err(Error::validation(
                    "T",
                    format!("must be a positive multiple of n = {}", self.n),
                ));
            }
            if self.r > self.t {
                return Err(Error::validation("r", "must not exceed T"));
            }
        }
        if let Topology::ErdosRenyi(p) = self.topology {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::validation("er_p", "must lie in (0, 1]"));
            }
        }
        if !(self.beta_hat > 0.0 && self.beta_hat.is_finite()) {
            return Err(Error::validation("beta_hat", "must be positive"));
        }
        if let BatchSize::Fixed(b) = self.solver.batch {
            let available = match self.problem {
                ProblemKind::PcaSynthetic => Some(self.m_per_node),
                ProblemKind::Lrmc => Some(self.t / self.n),
                ProblemKind::PcaIdx(_) => None,
            };
            if let Some(a) = available {
                if b > a {
                    return Err(Error::validation(
                        "batch_size",
                        format!("{b} exceeds the {a} local samples"),
                    ));
                }
            }
        }
        self.solver_config().validate()
    }
}

const KEYS: &[&str] = &[
    "problem",
    "n",
    "d",
    "r",
    "gamma",
    "m_per_node",
    "T",
    "topology",
    "er_p",
    "algorithm",
    "alpha_rule",
    "alpha",
    "beta_hat",
    "tau",
    "clip_b",
    "iterations",
    "batch_size",
    "consensus_rounds",
    "objective_scaling",
    "seed",
    "metric_every",
];

struct Entry {
    line: usize,
    value: String,
}

fn num<T: FromStr>(e: &Entry, key: &str) -> Result<T> {
    e.value.parse().map_err(|_| Error::Parse {
        line: e.line,
        msg: format!("`{key}`: cannot parse `{}`", e.value),
    })
}

/// `name(arg)` → `Some(arg)`
fn call<'a>(value: &'a str, name: &str) -> Option<&'a str> {
    value
        .strip_prefix(name)?
        .trim()
        .strip_prefix('(')?
        .strip_suffix(')')
        .map(str::trim)
}

fn parse_problem(e: &Entry) -> Result<ProblemKind> {
    match e.value.as_str() {
        "pca_synthetic" => Ok(ProblemKind::PcaSynthetic),
        "lrmc" => Ok(ProblemKind::Lrmc),
        v => match call(v, "pca_idx") {
            Some(path) if !path.is_empty() => Ok(ProblemKind::PcaIdx(PathBuf::from(path))),
            _ => Err(Error::validation(
                "problem",
                format!("expected pca_synthetic, pca_idx(<path>) or lrmc, got `{v}`"),
            )),
        },
    }
}

fn parse_alpha_rule(e: &Entry) -> Result<AlphaRule> {
    match e.value.as_str() {
        // the value is filled in from the `alpha` key
        "fixed" => Ok(AlphaRule::Fixed(f64::NAN)),
        "sqrt_k" => Ok(AlphaRule::SqrtK),
        "cube_root" => Ok(AlphaRule::CubeRoot),
        v => match call(v, "divide").map(str::parse::<f64>) {
            Some(Ok(c)) if c > 0.0 => Ok(AlphaRule::Divide(c)),
            _ => Err(Error::validation(
                "alpha_rule",
                format!("expected fixed, sqrt_k, divide(<c>) or cube_root, got `{v}`"),
            )),
        },
    }
}

/// Parses a flat `key = value` document; `#` starts a comment.
///
/// Missing keys take the defaults of [`ExperimentConfig::for_problem`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_for(text, None)
}

/// Like [`parse_config`], with `problem` fixed by the caller. A `problem`
/// key in the document must then agree with it.
pub fn parse_config_for(text: &str, problem: Option<ProblemKind>) -> Result<ExperimentConfig> {
    let mut entries: HashMap<&str, Entry> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key `{key}`"),
            });
        };
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("`{key}` has no value"),
            });
        }
        let prev = entries.insert(
            known,
            Entry {
                line,
                value: value.to_string(),
            },
        );
        if let Some(prev) = prev {
            return Err(Error::Parse {
                line,
                msg: format!("`{key}` already set on line {}", prev.line),
            });
        }
    }

    let problem = match (entries.get("problem"), problem) {
        (Some(e), None) => parse_problem(e)?,
        (Some(e), Some(forced)) => {
            let named = parse_problem(e)?;
            if std::mem::discriminant(&named) != std::mem::discriminant(&forced) {
                return Err(Error::validation(
                    "problem",
                    format!("config names {named} but {forced} was requested"),
                ));
            }
            forced
        }
        (None, forced) => forced.unwrap_or(ProblemKind::PcaSynthetic),
    };
    let mut cfg = ExperimentConfig::for_problem(problem);
    let get = |k: &str| entries.get(k);

    if let Some(e) = get("n") {
        cfg.n = num(e, "n")?;
    }
    if let Some(e) = get("d") {
        cfg.d = num(e, "d")?;
    }
    if let Some(e) = get("r") {
        cfg.r = num(e, "r")?;
    }
    if let Some(e) = get("gamma") {
        cfg.gamma = num(e, "gamma")?;
    }
    if let Some(e) = get("m_per_node") {
        cfg.m_per_node = num(e, "m_per_node")?;
    }
    if let Some(e) = get("T") {
        cfg.t = num(e, "T")?;
    }
    let er_p = match get("er_p") {
        Some(e) => Some(num::<f64>(e, "er_p")?),
        None => None,
    };
    if let Some(e) = get("topology") {
        cfg.topology = match e.value.as_str() {
            "ring" => Topology::Ring,
            "complete" => Topology::Complete,
            "er" | "erdos_renyi" => Topology::ErdosRenyi(er_p.unwrap_or(0.3)),
            v => {
                return Err(Error::validation(
                    "topology",
                    format!("expected ring, complete or er, got `{v}`"),
                ))
            }
        };
    }
    if er_p.is_some() && !matches!(cfg.topology, Topology::ErdosRenyi(_)) {
        return Err(Error::validation(
            "er_p",
            "only meaningful with topology = er",
        ));
    }
    if let Some(e) = get("algorithm") {
        cfg.solver.algorithm = e.value.parse::<Algorithm>()?;
    }
    if let Some(e) = get("alpha_rule") {
        cfg.alpha_rule = parse_alpha_rule(e)?;
    }
    match (get("alpha"), cfg.alpha_rule) {
        (Some(e), AlphaRule::Fixed(_)) => cfg.alpha_rule = AlphaRule::Fixed(num(e, "alpha")?),
        (Some(e), _) if get("alpha_rule").is_none() => {
            cfg.alpha_rule = AlphaRule::Fixed(num(e, "alpha")?)
        }
        (Some(_), rule) => {
            return Err(Error::validation(
                "alpha",
                format!("conflicts with alpha_rule = {rule}"),
            ))
        }
        (None, AlphaRule::Fixed(_)) => {
            return Err(Error::validation("alpha", "required by alpha_rule = fixed"))
        }
        (None, _) => {}
    }
    if let Some(e) = get("beta_hat") {
        cfg.beta_hat = num(e, "beta_hat")?;
    }
    if let Some(e) = get("tau") {
        cfg.solver.tau = num(e, "tau")?;
    }
    if let Some(e) = get("clip_b") {
        cfg.solver.clip_b = num(e, "clip_b")?;
    }
    if let Some(e) = get("iterations") {
        cfg.solver.iterations = num(e, "iterations")?;
    }
    if let Some(e) = get("batch_size") {
        cfg.solver.batch = match e.value.as_str() {
            "full" => BatchSize::Full,
            _ => BatchSize::Fixed(num(e, "batch_size")?),
        };
    }
    if let Some(e) = get("consensus_rounds") {
        cfg.solver.consensus_rounds = num(e, "consensus_rounds")?;
    }
    if let Some(e) = get("objective_scaling") {
        cfg.scaling = e.value.parse()?;
    }
    if let Some(e) = get("seed") {
        cfg.solver.seed = num(e, "seed")?;
    }
    if let Some(e) = get("metric_every") {
        cfg.solver.metric_every = num(e, "metric_every")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Renders `cfg` in the format read by [`parse_config`].
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    put("problem", cfg.problem.to_string());
    put("n", cfg.n.to_string());
    if !matches!(cfg.problem, ProblemKind::PcaIdx(_)) {
        put("d", cfg.d.to_string());
    }
    put("r", cfg.r.to_string());
    match cfg.problem {
        ProblemKind::PcaSynthetic => {
            put("gamma", cfg.gamma.to_string());
            put("m_per_node", cfg.m_per_node.to_string());
        }
        ProblemKind::Lrmc => put("T", cfg.t.to_string()),
        ProblemKind::PcaIdx(_) => {}
    }
    match cfg.topology {
        Topology::Ring => put("topology", "ring".into()),
        Topology::Complete => put("topology", "complete".into()),
        Topology::ErdosRenyi(p) => {
            put("topology", "er".into());
            put("er_p", p.to_string());
        }
    }
    put("algorithm", cfg.solver.algorithm.to_string());
    put("alpha_rule", cfg.alpha_rule.to_string());
    if let AlphaRule::Fixed(a) = cfg.alpha_rule {
        put("alpha", a.to_string());
    }
    put("beta_hat", cfg.beta_hat.to_string());
    if cfg.alpha_rule != AlphaRule::CubeRoot {
        put("tau", cfg.solver.tau.to_string());
    }
    put("clip_b", cfg.solver.clip_b.to_string());
    put("iterations", cfg.solver.iterations.to_string());
    put("batch_size", cfg.solver.batch.to_string());
    put("consensus_rounds", cfg.solver.consensus_rounds.to_string());
    put("objective_scaling", cfg.scaling.to_string());
    put("seed", cfg.solver.seed.to_string());
    put("metric_every", cfg.solver.metric_every.to_string());
    out
}
