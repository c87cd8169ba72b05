//! Communication graphs and doubly stochastic mixing matrices.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, Mat};
use crate::rng::Rng;

/// Maximum number of Erdős–Rényi draws before giving up on connectivity.
pub const MAX_ER_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    Ring,
    ErdosRenyi(f64),
    Complete,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Ring => write!(f, "ring"),
            Topology::ErdosRenyi(p) => write!(f, "er{p}"),
            Topology::Complete => write!(f, "complete"),
        }
    }
}

/// Undirected simple graph on nodes `0..n`. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidDims(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidDims(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }

    /// Edge-list text: first line `n`, then one `i j` line per edge in ascending order.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (i, j) in self.edges() {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing node count".into(),
        })?;
        let n: usize = first.trim().parse().map_err(|_| Error::Parse {
            line: 1,
            msg: format!("bad node count `{}`", first.trim()),
        })?;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok()).ok_or(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected `i j`, got `{line}`"),
                })
            };
            let mut toks = line.split_whitespace();
            let i = parse(toks.next())?;
            let j = parse(toks.next())?;
            if toks.next().is_some() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("trailing tokens in `{line}`"),
                });
            }
            edges.push((i, j));
        }
        Graph::new(n, edges)
    }
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Graph::from_edge_list(s)
    }
}

pub fn build_topology(kind: Topology, n: usize, rng: &mut Rng) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidDims(format!("topology needs n ≥ 2, got {n}")));
    }
    match kind {
        Topology::Ring => Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))),
        Topology::Complete => Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))),
        Topology::ErdosRenyi(p) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::validation(
                    "er_p",
                    format!("must lie in (0, 1], got {p}"),
                ));
            }
            for _ in 0..MAX_ER_ATTEMPTS {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                let g = Graph::new(n, edges)?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            Err(Error::NotConnected)
        }
    }
}

/// Symmetric doubly stochastic weights with a cached second singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: Mat,
    sigma2: f64,
}

impl MixingMatrix {
    /// Validates `w` against the mixing assumptions and caches `σ₂`.
    ///
    /// A `1×1` matrix `[1]` is accepted as the trivial single-node network with `σ₂ = 0`.
    pub fn from_matrix(w: Mat) -> Result<Self> {
        let n = w.nrows();
        if n == 0 || w.ncols() != n {
            return Err(Error::InvalidMixing(format!(
                "expected a square matrix, got {}×{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if n == 1 {
            if (w[(0, 0)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMixing("single-node weight must be 1".into()));
            }
            return Ok(Self { w, sigma2: 0.0 });
        }
        for i in 0..n {
            let row: f64 = w.row(i).sum();
            if (row - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMixing(format!("row {i} sums to {row}")));
            }
            let wii = w[(i, i)];
            if !(wii > 0.0 && wii < 1.0) {
                return Err(Error::InvalidMixing(format!("diagonal entry {i} is {wii}")));
            }
            for j in 0..n {
                if w[(i, j)] < 0.0 {
                    return Err(Error::InvalidMixing(format!("negative entry ({i}, {j})")));
                }
                if (w[(i, j)] - w[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidMixing(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        let eig = w.clone().symmetric_eigen();
        if let Some(bad) = eig
            .eigenvalues
            .iter()
            .find(|&&l| l <= -1.0 || l > 1.0 + 1e-12)
        {
            return Err(Error::InvalidMixing(format!(
                "eigenvalue {bad} outside (−1, 1]"
            )));
        }
        let sigma2 = second_largest_singular(&w);
        if sigma2 >= 1.0 - 1e-12 {
            return Err(Error::NotConnected);
        }
        Ok(Self { w, sigma2 })
    }

    pub fn single_node() -> Self {
        Self {
            w: Mat::identity(1, 1),
            sigma2: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &Mat {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Metropolis–Hastings weights `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges.
pub fn metropolis_weights(g: &Graph) -> Result<MixingMatrix> {
    if !g.is_connected() {
        return Err(Error::NotConnected);
    }
    let n = g.n();
    if n == 1 {
        return Ok(MixingMatrix::single_node());
    }
    let deg = g.degrees();
    let mut w = Mat::zeros(n, n);
    for (i, j) in g.edges() {
        let wij = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[(i, j)] = wij;
        w[(j, i)] = wij;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_matrix(w)
}

/// Second-largest singular value via a dense SVD.
pub fn second_largest_singular(w: &Mat) -> f64 {
    let s = singular_values(w);
    s.get(1).copied().unwrap_or(0.0)
}

/// One synchronous gossip round: `outᵢ = Σⱼ w_ij · valuesⱼ`.
pub fn mix(w: &MixingMatrix, values: &[Mat]) -> Result<Vec<Mat>> {
    let n = w.n();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: (n, 1),
            found: (values.len(), 1),
        });
    }
    let shape = values[0].shape();
    if let Some(bad) = values.iter().find(|v| v.shape() != shape) {
        return Err(Error::DimensionMismatch {
            expected: shape,
            found: bad.shape(),
        });
    }
    Ok((0..n)
        .map(|i| {
            let mut acc = Mat::zeros(shape.0, shape.1);
            for (j, v) in values.iter().enumerate() {
                let wij = w.weight(i, j);
                if wij != 0.0 {
                    acc += v * wij;
                }
            }
            acc
        })
        .collect())
}

/// `rounds` consecutive gossip rounds.
pub fn mix_rounds(w: &MixingMatrix, values: &[Mat], rounds: usize) -> Result<Vec<Mat>> {
    let mut out = mix(w, values)?;
    for _ in 1..rounds {
        out = mix(w, &out)?;
    }
    Ok(out)
}
