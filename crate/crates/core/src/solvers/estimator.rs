use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::network::{mix, MixingMatrix};

fn same_shape(a: &Mat, b: &Mat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.shape(),
            found: b.shape(),
        });
    }
    Ok(())
}

/// Hybrid estimator `q = g(x_k, ξ) + (1 − τ)(d_{k−1} − g(x_{k−1}, ξ))`.
///
/// Both gradients must come from the same sample `ξ`.
pub fn momentum_estimator(grad_new: &Mat, grad_old: &Mat, d_prev: &Mat, tau: f64) -> Result<Mat> {
    same_shape(grad_new, grad_old)?;
    same_shape(grad_new, d_prev)?;
    Ok(grad_new + (d_prev - grad_old) * (1.0 - tau))
}

/// Rescales `q` onto the Frobenius ball of radius `b` when it lies outside.
pub fn clip(q: &Mat, b: f64) -> Mat {
    let norm = q.norm();
    if norm <= b {
        q.clone()
    } else {
        q * (b / norm)
    }
}

/// `sᵢ ← Σⱼ w_ij s_j + dᵢ_new − dᵢ_prev`
pub fn tracking_update(
    w: &MixingMatrix,
    s_prev: &[Mat],
    d_new: &[Mat],
    d_prev: &[Mat],
) -> Result<Vec<Mat>> {
    if d_new.len() != s_prev.len() || d_prev.len() != s_prev.len() {
        return Err(Error::DimensionMismatch {
            expected: (s_prev.len(), 1),
            found: (d_new.len().min(d_prev.len()), 1),
        });
    }
    let mut s = mix(w, s_prev)?;
    for ((si, dn), dp) in s.iter_mut().zip(d_new).zip(d_prev) {
        same_shape(si, dn)?;
        same_shape(si, dp)?;
        *si += dn;
        *si -= dp;
    }
    Ok(s)
}
