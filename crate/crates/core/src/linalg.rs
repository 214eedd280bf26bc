//! Small dense linear-algebra helpers shared by the models and solvers.

use nalgebra::{DMatrix, DVector, SMatrix, SymmetricEigen};

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix, dropping
/// eigenvalues at or below `rel_tol * max_eigenvalue`.
pub fn sym_pinv<const N: usize>(m: &SMatrix<f64, N, N>, rel_tol: f64) -> SMatrix<f64, N, N> {
    let d = DMatrix::from_column_slice(N, N, m.as_slice());
    SMatrix::from_column_slice(sym_pinv_dyn(&d, rel_tol).as_slice())
}

pub fn sym_pinv_dyn(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > rel_tol * max && lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lambda;
        }
    }
    out
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Maps an index of `vec(X)` to the index of the same entry in `vec(X^T)`
/// for an `rows x cols` matrix `X` (column-major vectorization).
pub fn transpose_index(i: usize, rows: usize, cols: usize) -> usize {
    let (r, c) = (i % rows, i / rows);
    r * cols + c
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse())
}

/// `x^T W x`.
pub fn quad_form(w: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(w * x))
}

/// Ratio of largest to smallest eigenvalue of a symmetric matrix
/// (infinite when the smallest is not positive).
pub fn sym_condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 { f64::INFINITY } else { max / min }
}
