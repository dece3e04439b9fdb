//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for rank decisions on constraint matrices.
pub const RANK_TOL: f64 = 1e-12;

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::InvalidInput("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `rel_tol * σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * max).count()
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    // Pad to a square matrix so the thin SVD returns a full right basis.
    let mut padded = DMatrix::zeros(n.max(m.nrows()), n);
    padded.rows_mut(0, m.nrows()).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let max = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| svd.singular_values[k] <= RANK_TOL * max.max(f64::MIN_POSITIVE))
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Minimum-norm solution of `m x = b` for a full-row-rank `m`.
pub fn min_norm_solution(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = m * m.transpose();
    let z = solve(&gram, b)?;
    Ok(m.transpose() * z)
}

/// Solves a square system, preferring Cholesky and falling back to LU.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    a.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::InvalidInput("singular linear system".into()))
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::InvalidInput("matrix is singular".into()))
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).amax() <= tol * (1.0 + a.amax())
}

pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    is_symmetric(a, 1e-12) && a.clone().cholesky().is_some()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
