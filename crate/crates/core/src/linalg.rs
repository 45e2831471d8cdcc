//! Dense symmetric eigen-solves shared by the spectral, nystrom and diagnostics modules.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, eigenvalues sorted in decreasing order.
pub(crate) fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub(crate) fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// `D^{1/2} K D^{1/2}` with `D = diag(weights)`.
pub(crate) fn weighted_surrogate(k: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| sq[i] * k[(i, j)] * sq[j])
}

/// Eigenvalues of the operator `f -> sum_y k(., y) f(y) mu(y)`, decreasing.
pub(crate) fn weighted_eigenvalues(k: &DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    sym_eigenvalues(&weighted_surrogate(k, weights))
}

/// Flips column signs so the first entry that is not round-off is positive.
pub(crate) fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let peak = col.amax();
        if peak == 0.0 {
            continue;
        }
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-8 * peak) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}
