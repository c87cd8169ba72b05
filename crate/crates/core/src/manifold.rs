//! Stiefel-manifold geometry under the embedded Euclidean metric.
//!
//! `St(d, r) = { x ∈ ℝ^{d×r} : xᵀx = I_r }`. The metric projection onto the
//! manifold is the polar factor `UVᵀ` of a thin SVD, and it is single valued
//! inside the unit tube around the manifold.

use nalgebra::SVD;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, sym, Mat};
use crate::rng::Rng;

/// Orthonormality tolerance on `‖xᵀx − I‖_F`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Smallest singular value below which the polar factor is not meaningful.
pub const RANK_TOL: f64 = 1e-12;

/// Proximal-smoothness radius of the Stiefel manifold.
pub const PROX_RADIUS: f64 = 1.0;

/// A `d×r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    data: Mat,
}

impl StiefelPoint {
    pub fn new(data: Mat) -> Result<Self> {
        if data.ncols() == 0 || data.ncols() > data.nrows() {
            return Err(Error::InvalidDims(format!(
                "Stiefel point must be d×r with 1 ≤ r ≤ d, got {}×{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite);
        }
        let deviation = orthonormality_deviation(&data);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOnManifold { deviation });
        }
        Ok(Self { data })
    }

    /// The first `r` columns of the `d×d` identity.
    pub fn identity(d: usize, r: usize) -> Result<Self> {
        Self::new(Mat::identity(d, r))
    }

    pub(crate) fn from_polar(data: Mat) -> Self {
        debug_assert!(orthonormality_deviation(&data) <= ORTHONORMAL_TOL);
        Self { data }
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.data
    }

    pub fn into_matrix(self) -> Mat {
        self.data
    }

    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    pub fn r(&self) -> usize {
        self.data.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn check_dims(&self, m: &Mat) -> Result<()> {
        if m.shape() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: m.shape(),
            });
        }
        Ok(())
    }
}

/// `‖xᵀx − I‖_F`
pub fn orthonormality_deviation(x: &Mat) -> f64 {
    let r = x.ncols();
    (x.transpose() * x - Mat::identity(r, r)).norm()
}

/// A direction in the tangent space at some base point.
///
/// The base point is not stored; use [`TangentVector::deviation_at`] to check
/// the tangent condition against a specific point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    data: Mat,
}

impl TangentVector {
    pub fn zeros(d: usize, r: usize) -> Self {
        Self {
            data: Mat::zeros(d, r),
        }
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.data
    }

    pub fn into_matrix(self) -> Mat {
        self.data
    }

    /// `‖xᵀv + vᵀx‖_F`, zero for a tangent vector at `x`.
    pub fn deviation_at(&self, x: &StiefelPoint) -> f64 {
        let xtv = x.as_matrix().transpose() * &self.data;
        (&xtv + xtv.transpose()).norm()
    }
}

/// Nearest Stiefel point in Frobenius norm: the polar factor of `y`.
pub fn project_to_manifold(y: &Mat) -> Result<StiefelPoint> {
    if y.ncols() == 0 || y.ncols() > y.nrows() {
        return Err(Error::InvalidDims(format!(
            "cannot project a {}×{} matrix onto a Stiefel manifold",
            y.nrows(),
            y.ncols()
        )));
    }
    if !all_finite(y) {
        return Err(Error::NonFinite);
    }
    let svd = SVD::new(y.clone(), true, true);
    let min_singular = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_singular <= RANK_TOL {
        return Err(Error::RankDeficient { min_singular });
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    Ok(StiefelPoint::from_polar(u * v_t))
}

/// `g − x·sym(xᵀg)`
pub fn project_to_tangent(x: &StiefelPoint, g: &Mat) -> Result<TangentVector> {
    x.check_dims(g)?;
    let xm = x.as_matrix();
    let s = sym(&(xm.transpose() * g));
    Ok(TangentVector { data: g - xm * s })
}

/// Projection of the Euclidean average onto the manifold.
pub fn induced_mean(points: &[StiefelPoint]) -> Result<StiefelPoint> {
    let avg = euclidean_mean(points)?;
    project_to_manifold(&avg)
}

/// `(1/n) Σ xᵢ`
pub fn euclidean_mean(points: &[StiefelPoint]) -> Result<Mat> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidDims("mean of an empty point set".into()))?;
    let mut sum = Mat::zeros(first.d(), first.r());
    for p in points {
        first.check_dims(p.as_matrix())?;
        sum += p.as_matrix();
    }
    Ok(sum / points.len() as f64)
}

/// `min_Q ‖xQ − x*‖_F` over orthogonal `r×r` matrices `Q`.
pub fn procrustes_distance(x: &StiefelPoint, xstar: &StiefelPoint) -> Result<f64> {
    x.check_dims(xstar.as_matrix())?;
    let m = x.as_matrix().transpose() * xstar.as_matrix();
    let svd = SVD::new(m, true, true);
    let q = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    Ok((x.as_matrix() * q - xstar.as_matrix()).norm())
}

/// Polar factor of a standard Gaussian `d×r` matrix (Haar distributed).
pub fn random_stiefel(d: usize, r: usize, rng: &mut Rng) -> Result<StiefelPoint> {
    if r == 0 || r > d {
        return Err(Error::InvalidDims(format!(
            "random_stiefel needs 1 ≤ r ≤ d, got d={d}, r={r}"
        )));
    }
    loop {
        let g = gaussian_matrix(d, r, rng);
        match project_to_manifold(&g) {
            Ok(x) => return Ok(x),
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    // Column-major fill order is part of the determinism contract.
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}
