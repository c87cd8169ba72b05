use nalgebra::{Cholesky, DVector};
use rand::Rng as _;

use super::snapshot::{indexed, meta, read_meta, Snapshot};
use super::{ObjectiveScaling, Problem, Sample};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::{gaussian_matrix, project_to_tangent, StiefelPoint, TangentVector};
use crate::rng::Rng;

const SNAPSHOT_KIND: f64 = 2.0;

/// Tikhonov damping of the per-column least-squares solves.
pub const INNER_DAMPING: f64 = 1e-8;

/// Decentralized low-rank matrix completion with the column factor eliminated.
///
/// Node `i` holds the column block `Aᵢ` (zero off the mask) and
/// `fᵢ(x) = ½·c·‖P_Ωᵢ(x·Vᵢ(x) − Aᵢ)‖²` where `Vᵢ(x)` is the damped
/// least-squares column fit.
#[derive(Debug, Clone)]
pub struct LrmcInstance {
    shards: Vec<Mat>,
    masks: Vec<Mat>,
    observed: Vec<Vec<Vec<usize>>>,
    r: usize,
    ground_truth: Option<Mat>,
    scaling: ObjectiveScaling,
}

impl LrmcInstance {
    pub fn new(
        shards: Vec<Mat>,
        masks: Vec<Mat>,
        r: usize,
        ground_truth: Option<Mat>,
        scaling: ObjectiveScaling,
    ) -> Result<Self> {
        if shards.is_empty() || shards.len() != masks.len() {
            return Err(Error::InvalidDims(
                "need one mask per nonempty shard".into(),
            ));
        }
        let d = shards[0].nrows();
        if r == 0 || r > d {
            return Err(Error::InvalidDims(format!(
                "need 1 ≤ r ≤ d, got r={r}, d={d}"
            )));
        }
        let mut observed = Vec::with_capacity(shards.len());
        for (a, m) in shards.iter().zip(&masks) {
            if a.shape() != m.shape() || a.nrows() != d || a.ncols() == 0 {
                return Err(Error::DimensionMismatch {
                    expected: a.shape(),
                    found: m.shape(),
                });
            }
            for (av, mv) in a.iter().zip(m.iter()) {
                if *mv != 0.0 && *mv != 1.0 {
                    return Err(Error::InvalidDims(format!("mask entry {mv} is not binary")));
                }
                if *mv == 0.0 && *av != 0.0 {
                    return Err(Error::InvalidDims("shard is nonzero off the mask".into()));
                }
            }
            observed.push(
                (0..m.ncols())
                    .map(|t| (0..d).filter(|&k| m[(k, t)] == 1.0).collect())
                    .collect(),
            );
        }
        if let Some(gt) = &ground_truth {
            let t: usize = shards.iter().map(|s| s.ncols()).sum();
            if gt.shape() != (d, t) {
                return Err(Error::DimensionMismatch {
                    expected: (d, t),
                    found: gt.shape(),
                });
            }
        }
        Ok(Self {
            shards,
            masks,
            observed,
            r,
            ground_truth,
            scaling,
        })
    }

    pub fn to_snapshot(&self) -> Snapshot {
        let mut snap = Snapshot::default();
        snap.push("meta", meta(SNAPSHOT_KIND, self.r, self.scaling));
        for (i, (s, m)) in self.shards.iter().zip(&self.masks).enumerate() {
            snap.push(format!("shard/{i}"), s.clone());
            snap.push(format!("mask/{i}"), m.clone());
        }
        if let Some(gt) = &self.ground_truth {
            snap.push("truth", gt.clone());
        }
        snap
    }

    pub fn from_snapshot(snap: &Snapshot) -> Result<Self> {
        let (r, scaling) = read_meta(snap, SNAPSHOT_KIND)?;
        Self::new(
            indexed(snap, "shard"),
            indexed(snap, "mask"),
            r,
            snap.get("truth").cloned(),
            scaling,
        )
    }

    pub fn shards(&self) -> &[Mat] {
        &self.shards
    }

    pub fn masks(&self) -> &[Mat] {
        &self.masks
    }

    pub fn ground_truth(&self) -> Option<&Mat> {
        self.ground_truth.as_ref()
    }

    pub fn d(&self) -> usize {
        self.shards[0].nrows()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn total_columns(&self) -> usize {
        self.shards.iter().map(|s| s.ncols()).sum()
    }

    pub fn observed_fraction(&self) -> f64 {
        let obs: f64 = self.masks.iter().map(|m| m.sum()).sum();
        obs / (self.d() * self.total_columns()) as f64
    }

    fn column_offset(&self, node: usize) -> usize {
        self.shards[..node].iter().map(|s| s.ncols()).sum()
    }

    /// `½ Σᵢ ‖P_Ωᵢ(x·Vᵢ(x) − Aᵢ)‖²`
    pub fn objective_at(&self, x: &Mat) -> f64 {
        (0..self.shards.len())
            .map(|i| {
                let v = solve_columns(
                    x,
                    &self.shards[i],
                    &self.observed[i],
                    0..self.shards[i].ncols(),
                );
                0.5 * residual_sq(x, &v, &self.shards[i], &self.observed[i])
            })
            .sum()
    }
}

/// `r(d + T − r) / (dT)`
pub fn observation_rate(d: usize, t: usize, r: usize) -> f64 {
    (r * (d + t - r)) as f64 / (d * t) as f64
}

/// Random rank-`r` instance `L·R` observed at rate `r(d+T−r)/(dT)`, split by columns.
pub fn gen_lrmc(
    n: usize,
    d: usize,
    t: usize,
    r: usize,
    scaling: ObjectiveScaling,
    rng: &mut Rng,
) -> Result<LrmcInstance> {
    if n == 0 || d == 0 || t == 0 || r == 0 || r > d || r > t {
        return Err(Error::InvalidDims(format!(
            "invalid LRMC dims n={n}, d={d}, T={t}, r={r}"
        )));
    }
    if !t.is_multiple_of(n) {
        return Err(Error::InvalidDims(format!(
            "T={t} is not divisible by n={n}"
        )));
    }
    let nu = observation_rate(d, t, r);
    let left = gaussian_matrix(d, r, rng);
    let right = gaussian_matrix(r, t, rng);
    let truth = &left * &right;
    let mask = Mat::from_fn(
        d,
        t,
        |_, _| if rng.random::<f64>() <= nu { 1.0 } else { 0.0 },
    );
    let observed = truth.component_mul(&mask);
    let block = t / n;
    let shards = (0..n)
        .map(|i| observed.columns(i * block, block).into_owned())
        .collect();
    let masks = (0..n)
        .map(|i| mask.columns(i * block, block).into_owned())
        .collect();
    LrmcInstance::new(shards, masks, r, Some(truth), scaling)
}

fn mask_rows(mask: &Mat) -> Vec<Vec<usize>> {
    (0..mask.ncols())
        .map(|t| (0..mask.nrows()).filter(|&k| mask[(k, t)] != 0.0).collect())
        .collect()
}

fn solve_column(x: &Mat, a: &Mat, rows: &[usize], t: usize) -> DVector<f64> {
    let r = x.ncols();
    let mut normal = Mat::identity(r, r) * INNER_DAMPING;
    let mut rhs = DVector::zeros(r);
    for &k in rows {
        let xk = x.row(k);
        for p in 0..r {
            rhs[p] += xk[p] * a[(k, t)];
            for q in 0..r {
                normal[(p, q)] += xk[p] * xk[q];
            }
        }
    }
    match Cholesky::new(normal) {
        Some(ch) => ch.solve(&rhs),
        None => DVector::zeros(r),
    }
}

fn solve_columns(
    x: &Mat,
    a: &Mat,
    observed: &[Vec<usize>],
    cols: impl Iterator<Item = usize>,
) -> Vec<(usize, DVector<f64>)> {
    cols.map(|t| (t, solve_column(x, a, &observed[t], t)))
        .collect()
}

fn residual_sq(x: &Mat, v: &[(usize, DVector<f64>)], a: &Mat, observed: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    for (t, vt) in v {
        for &k in &observed[*t] {
            let pred: f64 = x.row(k).iter().zip(vt.iter()).map(|(p, q)| p * q).sum();
            let e = pred - a[(k, *t)];
            total += e * e;
        }
    }
    total
}

/// Column-wise damped least squares `V[:, t] = argmin ‖P_Ω(x·v − a_t)‖² + λ‖v‖²`.
pub fn lrmc_inner_solve(x: &StiefelPoint, shard: &Mat, mask: &Mat) -> Result<Mat> {
    check_shapes(x.as_matrix(), shard, mask)?;
    let observed = mask_rows(mask);
    let cols = solve_columns(x.as_matrix(), shard, &observed, 0..shard.ncols());
    let mut v = Mat::zeros(x.r(), shard.ncols());
    for (t, vt) in cols {
        v.set_column(t, &vt);
    }
    Ok(v)
}

/// `‖P_Ω(x·V − A)‖²`
pub fn lrmc_residual(x: &Mat, v: &Mat, shard: &Mat, mask: &Mat) -> f64 {
    ((x * v - shard).component_mul(mask)).norm_squared()
}

fn check_shapes(x: &Mat, shard: &Mat, mask: &Mat) -> Result<()> {
    if shard.nrows() != x.nrows() || shard.shape() != mask.shape() {
        return Err(Error::DimensionMismatch {
            expected: (x.nrows(), shard.ncols()),
            found: mask.shape(),
        });
    }
    Ok(())
}

fn gradient_columns(
    x: &Mat,
    shard: &Mat,
    observed: &[Vec<usize>],
    cols: &[usize],
    scale: f64,
) -> Mat {
    let (d, r) = x.shape();
    let mut g = Mat::zeros(d, r);
    for &t in cols {
        let v = solve_column(x, shard, &observed[t], t);
        for &k in &observed[t] {
            let pred: f64 = x.row(k).iter().zip(v.iter()).map(|(p, q)| p * q).sum();
            let e = pred - shard[(k, t)];
            for p in 0..r {
                g[(k, p)] += e * v[p];
            }
        }
    }
    g * scale
}

/// `c·P_Ω(x·V − A)·Vᵀ` with `V` from the inner solve, restricted to the sampled columns.
///
/// Accepts any ambient `x` so it can be differentiated numerically off the manifold.
pub fn lrmc_euclidean_gradient(
    x: &Mat,
    shard: &Mat,
    mask: &Mat,
    sample: &Sample,
    scaling: ObjectiveScaling,
) -> Result<Mat> {
    check_shapes(x, shard, mask)?;
    let observed = mask_rows(mask);
    sampled_gradient(x, shard, &observed, sample, scaling)
}

fn sampled_gradient(
    x: &Mat,
    shard: &Mat,
    observed: &[Vec<usize>],
    sample: &Sample,
    scaling: ObjectiveScaling,
) -> Result<Mat> {
    let t = shard.ncols();
    sample.check(t)?;
    Ok(match sample {
        Sample::Full => {
            let cols: Vec<usize> = (0..t).collect();
            gradient_columns(x, shard, observed, &cols, scaling.factor(t, t))
        }
        Sample::Indices(idx) => {
            gradient_columns(x, shard, observed, idx, scaling.factor(idx.len(), t))
        }
    })
}

pub fn lrmc_riemannian_gradient(
    x: &StiefelPoint,
    shard: &Mat,
    mask: &Mat,
    sample: &Sample,
    scaling: ObjectiveScaling,
) -> Result<TangentVector> {
    let g = lrmc_euclidean_gradient(x.as_matrix(), shard, mask, sample, scaling)?;
    project_to_tangent(x, &g)
}

impl Problem for LrmcInstance {
    fn num_nodes(&self) -> usize {
        self.shards.len()
    }

    fn dims(&self) -> (usize, usize) {
        (self.d(), self.r)
    }

    fn local_samples(&self, node: usize) -> usize {
        self.shards[node].ncols()
    }

    fn euclidean_gradient(&self, node: usize, x: &StiefelPoint, sample: &Sample) -> Result<Mat> {
        if x.dims() != (self.d(), self.r) {
            return Err(Error::DimensionMismatch {
                expected: (self.d(), self.r),
                found: x.dims(),
            });
        }
        let shard = self
            .shards
            .get(node)
            .ok_or_else(|| Error::InvalidDims(format!("no node {node}")))?;
        sampled_gradient(
            x.as_matrix(),
            shard,
            &self.observed[node],
            sample,
            self.scaling,
        )
    }

    fn objective(&self, x: &StiefelPoint) -> Result<f64> {
        if x.dims() != (self.d(), self.r) {
            return Err(Error::DimensionMismatch {
                expected: (self.d(), self.r),
                found: x.dims(),
            });
        }
        Ok(self.objective_at(x.as_matrix()))
    }

    /// `‖P_Ω(x̄·V(x̄) − L·R)‖_F / ‖P_Ω(L·R)‖_F`
    fn reference_fit(&self, x: &StiefelPoint) -> Option<f64> {
        let truth = self.ground_truth.as_ref()?;
        let xm = x.as_matrix();
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 0..self.shards.len() {
            let off = self.column_offset(i);
            let cols = solve_columns(
                xm,
                &self.shards[i],
                &self.observed[i],
                0..self.shards[i].ncols(),
            );
            for (t, v) in cols {
                for &k in &self.observed[i][t] {
                    let pred: f64 = xm.row(k).iter().zip(v.iter()).map(|(p, q)| p * q).sum();
                    let g = truth[(k, off + t)];
                    err += (pred - g) * (pred - g);
                    norm += g * g;
                }
            }
        }
        Some((err / norm.max(f64::MIN_POSITIVE)).sqrt())
    }

    fn name(&self) -> &'static str {
        "lrmc"
    }
}
