//! Thin helpers over nalgebra: numerical rank, minimum-norm solves, null spaces.

use nalgebra::{DMatrix, DVector};

/// Singular-value threshold for a relative tolerance.
fn threshold(sv: &DVector<f64>, rtol: f64) -> f64 {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    (rtol * smax).max(f64::MIN_POSITIVE)
}

pub fn rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let th = threshold(&sv, rtol);
    sv.iter().filter(|&&s| s > th).count()
}

pub fn determinant(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    a.clone().lu().determinant()
}

/// Minimum-norm least-squares solution of `a x = b`, and the numerical rank of `a`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> (DVector<f64>, usize) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), 0);
    }
    let svd = a.clone().svd(true, true);
    let th = threshold(&svd.singular_values, rtol);
    let r = svd.singular_values.iter().filter(|&&s| s > th).count();
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut x = DVector::zeros(a.ncols());
    for (j, &s) in svd.singular_values.iter().enumerate() {
        if s > th {
            let c = u.column(j).dot(b) / s;
            x += vt.row(j).transpose() * c;
        }
    }
    (x, r)
}

/// Orthonormal basis (as columns) of the left null space {l : l^T a = 0}.
pub fn left_null_space(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to at least square so the SVD returns a full U.
    let mut padded = DMatrix::zeros(rows, cols.max(rows));
    padded.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = padded.svd(true, false);
    let th = threshold(&svd.singular_values, rtol);
    let u = svd.u.expect("u requested");
    let cols: Vec<_> = (0..rows)
        .filter(|&j| svd.singular_values[j] <= th)
        .map(|j| u.column(j).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Norm of the part of `b` outside the column space of `a`.
pub fn inconsistency(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> f64 {
    let (x, _) = min_norm_solve(a, b, rtol);
    (a * x - b).norm()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
