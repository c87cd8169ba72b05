use nalgebra::DVector;

use super::snapshot::{indexed, meta, read_meta, Snapshot};
use super::{ObjectiveScaling, Problem, Sample};

const SNAPSHOT_KIND: f64 = 1.0;
use crate::error::{Error, Result};
use crate::linalg::{thin_svd, top_eigenvectors, Mat};
use crate::manifold::{gaussian_matrix, project_to_tangent, StiefelPoint, TangentVector};
use crate::rng::Rng;

/// Decentralized PCA: node `i` holds rows `Aᵢ` and
/// `fᵢ(x) = −½·c·tr(xᵀAᵢᵀAᵢx)` with `c` set by the objective scaling.
#[derive(Debug, Clone)]
pub struct PcaInstance {
    shards: Vec<Mat>,
    grams: Vec<Mat>,
    r: usize,
    optimum: Option<StiefelPoint>,
    scaling: ObjectiveScaling,
}

impl PcaInstance {
    /// Builds an instance from row shards; the optimum is computed from the
    /// stacked data when `compute_optimum` is set.
    pub fn from_shards(
        shards: Vec<Mat>,
        r: usize,
        scaling: ObjectiveScaling,
        compute_optimum: bool,
    ) -> Result<Self> {
        let d = shards
            .first()
            .map(|s| s.ncols())
            .ok_or_else(|| Error::InvalidDims("PCA instance needs at least one shard".into()))?;
        if r == 0 || r > d {
            return Err(Error::InvalidDims(format!(
                "need 1 ≤ r ≤ d, got r={r}, d={d}"
            )));
        }
        for s in &shards {
            if s.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: (s.nrows(), d),
                    found: s.shape(),
                });
            }
            if s.nrows() == 0 {
                return Err(Error::InvalidDims("empty shard".into()));
            }
        }
        let grams: Vec<Mat> = shards.iter().map(|a| a.transpose() * a).collect();
        let optimum = if compute_optimum {
            let mut total = Mat::zeros(d, d);
            for g in &grams {
                total += g;
            }
            let (_, vecs) = top_eigenvectors(&total, r);
            Some(crate::manifold::project_to_manifold(&vecs)?)
        } else {
            None
        };
        Ok(Self {
            shards,
            grams,
            r,
            optimum,
            scaling,
        })
    }

    pub fn with_optimum(mut self, optimum: StiefelPoint) -> Result<Self> {
        if optimum.dims() != (self.d(), self.r) {
            return Err(Error::DimensionMismatch {
                expected: (self.d(), self.r),
                found: optimum.dims(),
            });
        }
        self.optimum = Some(optimum);
        Ok(self)
    }

    pub fn to_snapshot(&self) -> Snapshot {
        let mut snap = Snapshot::default();
        snap.push("meta", meta(SNAPSHOT_KIND, self.r, self.scaling));
        for (i, s) in self.shards.iter().enumerate() {
            snap.push(format!("shard/{i}"), s.clone());
        }
        if let Some(opt) = &self.optimum {
            snap.push("optimum", opt.as_matrix().clone());
        }
        snap
    }

    pub fn from_snapshot(snap: &Snapshot) -> Result<Self> {
        let (r, scaling) = read_meta(snap, SNAPSHOT_KIND)?;
        let inst = Self::from_shards(indexed(snap, "shard"), r, scaling, false)?;
        match snap.get("optimum") {
            Some(opt) => inst.with_optimum(StiefelPoint::new(opt.clone())?),
            None => Ok(inst),
        }
    }

    pub fn shards(&self) -> &[Mat] {
        &self.shards
    }

    pub fn d(&self) -> usize {
        self.shards[0].ncols()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn scaling(&self) -> ObjectiveScaling {
        self.scaling
    }

    /// Row-stacked data matrix.
    pub fn stacked(&self) -> Mat {
        let rows: usize = self.shards.iter().map(|s| s.nrows()).sum();
        let mut out = Mat::zeros(rows, self.d());
        let mut at = 0;
        for s in &self.shards {
            out.rows_mut(at, s.nrows()).copy_from(s);
            at += s.nrows();
        }
        out
    }
}

/// Synthetic data with prescribed spectrum `γ, γ², …, γᵈ`.
///
/// A Gaussian `(n·m)×d` matrix `B = UΣVᵀ` is re-weighted to `A = U·diag(γʲ)·Vᵀ`
/// and split row-wise into `n` shards of `m` rows. The optimum is the first
/// `r` columns of `V`.
pub fn gen_synthetic_pca(
    n: usize,
    m_per_node: usize,
    d: usize,
    r: usize,
    gamma: f64,
    scaling: ObjectiveScaling,
    rng: &mut Rng,
) -> Result<PcaInstance> {
    if n == 0 || m_per_node == 0 || d == 0 {
        return Err(Error::InvalidDims(
            "n, m_per_node and d must be positive".into(),
        ));
    }
    if n * m_per_node < d {
        return Err(Error::InvalidDims(format!(
            "need n·m ≥ d, got {}·{} < {d}",
            n, m_per_node
        )));
    }
    if r == 0 || r > d {
        return Err(Error::InvalidDims(format!(
            "need 1 ≤ r ≤ d, got r={r}, d={d}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation(
            "gamma",
            format!("must lie in (0, 1), got {gamma}"),
        ));
    }
    let b = gaussian_matrix(n * m_per_node, d, rng);
    let (u, _, v) = thin_svd(&b);
    let spectrum = DVector::from_iterator(d, (1..=d).map(|j| gamma.powi(j as i32)));
    let a = u * Mat::from_diagonal(&spectrum) * v.transpose();
    let shards = (0..n)
        .map(|i| a.rows(i * m_per_node, m_per_node).into_owned())
        .collect();
    let optimum = StiefelPoint::new(v.columns(0, r).into_owned())?;
    PcaInstance::from_shards(shards, r, scaling, false)?.with_optimum(optimum)
}

/// `−(1/(2n)) Σᵢ tr(xᵀAᵢᵀAᵢx)` at a common point.
pub fn pca_objective(inst: &PcaInstance, x: &StiefelPoint) -> Result<f64> {
    if x.d() != inst.d() {
        return Err(Error::DimensionMismatch {
            expected: (inst.d(), x.r()),
            found: x.dims(),
        });
    }
    let xm = x.as_matrix();
    let total: f64 = inst.grams.iter().map(|g| xm.dot(&(g * xm))).sum();
    Ok(-total / (2.0 * inst.shards.len() as f64))
}

fn pca_euclidean_gradient(
    inst: &PcaInstance,
    node: usize,
    x: &StiefelPoint,
    sample: &Sample,
) -> Result<Mat> {
    let shard = inst
        .shards
        .get(node)
        .ok_or_else(|| Error::InvalidDims(format!("no node {node}")))?;
    if x.d() != inst.d() {
        return Err(Error::DimensionMismatch {
            expected: (inst.d(), x.r()),
            found: x.dims(),
        });
    }
    let m = shard.nrows();
    sample.check(m)?;
    let xm = x.as_matrix();
    match sample {
        Sample::Full => {
            let c = inst.scaling.factor(m, m);
            Ok(&inst.grams[node] * xm * (-c))
        }
        Sample::Indices(idx) => {
            let c = inst.scaling.factor(idx.len(), m);
            let mut acc = Mat::zeros(x.d(), x.r());
            for &t in idx {
                let row = shard.row(t);
                // a aᵀ x  =  aᵀ ⊗ (a x)
                let ax = row * xm;
                acc.ger(1.0, &row.transpose(), &ax.transpose(), 1.0);
            }
            Ok(acc * (-c))
        }
    }
}

/// Riemannian gradient of `fᵢ` at `x`, exact for [`Sample::Full`] and unbiased otherwise.
pub fn pca_riemannian_gradient(
    inst: &PcaInstance,
    node: usize,
    x: &StiefelPoint,
    sample: &Sample,
) -> Result<TangentVector> {
    let g = pca_euclidean_gradient(inst, node, x, sample)?;
    project_to_tangent(x, &g)
}

impl Problem for PcaInstance {
    fn num_nodes(&self) -> usize {
        self.shards.len()
    }

    fn dims(&self) -> (usize, usize) {
        (self.d(), self.r)
    }

    fn local_samples(&self, node: usize) -> usize {
        self.shards[node].nrows()
    }

    fn euclidean_gradient(&self, node: usize, x: &StiefelPoint, sample: &Sample) -> Result<Mat> {
        pca_euclidean_gradient(self, node, x, sample)
    }

    fn objective(&self, x: &StiefelPoint) -> Result<f64> {
        pca_objective(self, x)
    }

    fn optimum(&self) -> Option<&StiefelPoint> {
        self.optimum.as_ref()
    }

    fn name(&self) -> &'static str {
        "pca"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;
    use crate::manifold::{project_to_manifold, random_stiefel};
    use crate::problems::BatchSize;
    use crate::rng::seeded;

    #[test]
    fn synthetic_spectrum_is_exact() {
        let inst = gen_synthetic_pca(
            8,
            1000,
            10,
            5,
            0.8,
            ObjectiveScaling::PerSample,
            &mut seeded(4),
        )
        .unwrap();
        assert_eq!(inst.shards().len(), 8);
        assert!(inst.shards().iter().all(|s| s.shape() == (1000, 10)));
        let s = singular_values(&inst.stacked());
        for (j, sv) in s.iter().enumerate() {
            assert!(
                (sv - 0.8f64.powi(j as i32 + 1)).abs() < 1e-10,
                "σ_{j} = {sv}"
            );
        }
        let opt = inst.optimum().unwrap();
        assert!(crate::manifold::orthonormality_deviation(opt.as_matrix()) < 1e-10);
    }

    #[test]
    fn synthetic_optimum_beats_random_points() {
        let inst = gen_synthetic_pca(2, 5, 4, 2, 0.5, ObjectiveScaling::PerSample, &mut seeded(1))
            .unwrap();
        let best = pca_objective(&inst, inst.optimum().unwrap()).unwrap();
        let mut rng = seeded(100);
        for _ in 0..200 {
            let z = random_stiefel(4, 2, &mut rng).unwrap();
            assert!(best <= pca_objective(&inst, &z).unwrap() + 1e-14);
        }
    }

    #[test]
    fn objective_at_optimum_is_top_energy() {
        let (n, gamma, r) = (4, 0.7f64, 3);
        let inst =
            gen_synthetic_pca(n, 50, 6, r, gamma, ObjectiveScaling::Raw, &mut seeded(2)).unwrap();
        let expected: f64 =
            -(1..=r).map(|j| gamma.powi(2 * j as i32)).sum::<f64>() / (2.0 * n as f64);
        let got = pca_objective(&inst, inst.optimum().unwrap()).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn objective_trivial_cases() {
        let zero = PcaInstance::from_shards(
            vec![Mat::zeros(3, 4), Mat::zeros(2, 4)],
            2,
            ObjectiveScaling::Raw,
            false,
        )
        .unwrap();
        let x = StiefelPoint::identity(4, 2).unwrap();
        assert_eq!(pca_objective(&zero, &x).unwrap(), 0.0);

        let eye =
            PcaInstance::from_shards(vec![Mat::identity(5, 5)], 3, ObjectiveScaling::Raw, false)
                .unwrap();
        let x = random_stiefel(5, 3, &mut seeded(3)).unwrap();
        assert!((pca_objective(&eye, &x).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn identity_data_has_zero_riemannian_gradient() {
        let inst =
            PcaInstance::from_shards(vec![Mat::identity(6, 6)], 2, ObjectiveScaling::Raw, false)
                .unwrap();
        let x = random_stiefel(6, 2, &mut seeded(5)).unwrap();
        let eg = inst.euclidean_gradient(0, &x, &Sample::Full).unwrap();
        assert!((eg + x.as_matrix()).norm() < 1e-12);
        let rg = pca_riemannian_gradient(&inst, 0, &x, &Sample::Full).unwrap();
        assert!(rg.as_matrix().norm() < 1e-12);
    }

    #[test]
    fn every_row_once_matches_full_gradient() {
        for scaling in [ObjectiveScaling::PerSample, ObjectiveScaling::Raw] {
            let inst = gen_synthetic_pca(3, 20, 5, 2, 0.9, scaling, &mut seeded(6)).unwrap();
            let x = random_stiefel(5, 2, &mut seeded(7)).unwrap();
            let full = pca_riemannian_gradient(&inst, 1, &x, &Sample::Full).unwrap();
            let all = Sample::Indices((0..20).collect());
            let rows = pca_riemannian_gradient(&inst, 1, &x, &all).unwrap();
            let rel = (full.as_matrix() - rows.as_matrix()).norm() / full.as_matrix().norm();
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn batch_too_large() {
        let inst =
            gen_synthetic_pca(2, 5, 3, 1, 0.5, ObjectiveScaling::Raw, &mut seeded(0)).unwrap();
        let r = inst.draw_sample(0, BatchSize::Fixed(6), &mut seeded(0));
        assert!(matches!(
            r,
            Err(Error::BatchTooLarge {
                batch: 6,
                available: 5
            })
        ));
        let x = StiefelPoint::identity(3, 1).unwrap();
        let bad = Sample::Indices(vec![7]);
        assert!(pca_riemannian_gradient(&inst, 0, &x, &bad).is_err());
    }

    #[test]
    fn stochastic_gradient_is_unbiased() {
        let inst = gen_synthetic_pca(
            2,
            200,
            10,
            5,
            0.8,
            ObjectiveScaling::PerSample,
            &mut seeded(21),
        )
        .unwrap();
        let x = random_stiefel(10, 5, &mut seeded(22)).unwrap();
        let full = inst.euclidean_gradient(0, &x, &Sample::Full).unwrap();
        let mut rng = seeded(21);
        let n_draws = 10_000;
        let mut sum = Mat::zeros(10, 5);
        let mut sum_sq = Mat::zeros(10, 5);
        for _ in 0..n_draws {
            let s = inst.draw_sample(0, BatchSize::Fixed(10), &mut rng).unwrap();
            let g = inst.euclidean_gradient(0, &x, &s).unwrap();
            sum_sq += g.component_mul(&g);
            sum += g;
        }
        let mean = &sum / n_draws as f64;
        for k in 0..mean.len() {
            let var = sum_sq[k] / n_draws as f64 - mean[k] * mean[k];
            let se = (var.max(0.0) / n_draws as f64).sqrt();
            assert!(
                (mean[k] - full[k]).abs() <= 4.5 * se + 1e-15,
                "component {k}: {} vs {} (se {se})",
                mean[k],
                full[k]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_manifold() {
        let inst =
            gen_synthetic_pca(3, 30, 6, 2, 0.8, ObjectiveScaling::Raw, &mut seeded(8)).unwrap();
        let mut rng = seeded(9);
        let x = random_stiefel(6, 2, &mut rng).unwrap();
        // f = (1/n) Σ fᵢ coincides with pca_objective under raw scaling.
        let mut grad = Mat::zeros(6, 2);
        for i in 0..3 {
            grad += pca_riemannian_gradient(&inst, i, &x, &Sample::Full)
                .unwrap()
                .into_matrix();
        }
        grad /= 3.0;
        for _ in 0..10 {
            let h = project_to_tangent(&x, &gaussian_matrix(6, 2, &mut rng))
                .unwrap()
                .into_matrix();
            let t = 1e-5;
            let fp = pca_objective(
                &inst,
                &project_to_manifold(&(x.as_matrix() + &h * t)).unwrap(),
            )
            .unwrap();
            let fm = pca_objective(
                &inst,
                &project_to_manifold(&(x.as_matrix() - &h * t)).unwrap(),
            )
            .unwrap();
            let fd = (fp - fm) / (2.0 * t);
            let exact = grad.dot(&h);
            assert!(
                (fd - exact).abs() <= 1e-4 * exact.abs().max(1e-8),
                "{fd} vs {exact}"
            );
        }
    }

    #[test]
    fn optimum_from_shards_matches_generator() {
        let inst =
            gen_synthetic_pca(4, 25, 6, 3, 0.6, ObjectiveScaling::Raw, &mut seeded(10)).unwrap();
        let rebuilt =
            PcaInstance::from_shards(inst.shards().to_vec(), 3, ObjectiveScaling::Raw, true)
                .unwrap();
        let d = crate::manifold::procrustes_distance(
            rebuilt.optimum().unwrap(),
            inst.optimum().unwrap(),
        )
        .unwrap();
        assert!(d < 1e-8);
    }
}
