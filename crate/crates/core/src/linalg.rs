//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

pub type Mat = DMatrix<f64>;

/// `(m + mᵀ) / 2`
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Trace inner product `tr(aᵀb)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Thin SVD with singular values in descending order.
///
/// Returns `(u, sigma, v)` with `u: m×k`, `v: n×k`, `k = min(m, n)`.
pub fn thin_svd(m: &Mat) -> (Mat, Vec<f64>, Mat) {
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let u = Mat::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let v = Mat::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])]);
    let sigma = order.iter().map(|&k| sigma[k]).collect();
    (u, sigma, v)
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvectors of a symmetric matrix for its `k` largest eigenvalues, as columns.
pub fn top_eigenvectors(s: &Mat, k: usize) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(k);
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = Mat::from_fn(s.nrows(), k, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_svd_sorted_and_reconstructs() {
        let m = Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
        let (u, s, v) = thin_svd(&m);
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 1.0).abs() < 1e-14);
        let rebuilt = &u * Mat::from_diagonal(&nalgebra::DVector::from_vec(s)) * v.transpose();
        assert!((rebuilt - m).norm() < 1e-13);
    }
}
