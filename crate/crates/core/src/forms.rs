//! Dense coordinate representations of 1-forms and 2-forms at a point.
//!
//! A 1-form is a covector of chart length. A 2-form is an antisymmetric
//! matrix `W` with `w(X, Y) = X^T W Y`.

use nalgebra::{DMatrix, DVector};

use crate::error::{FieldError, Result};
use crate::linalg;
use crate::tolerances::RANK_RTOL;

pub fn basis(dim: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[i] = 1.0;
    e
}

/// `a ^ b` as a matrix.
pub fn wedge(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose() - b * a.transpose()
}

/// Contraction `i_X w`.
pub fn interior(w: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    w.transpose() * x
}

/// Pullback of a 2-form along a map with Jacobian `j` (target x source).
pub fn pullback2(w: &DMatrix<f64>, j: &DMatrix<f64>) -> DMatrix<f64> {
    j.transpose() * w * j
}

pub fn pullback1(a: &DVector<f64>, j: &DMatrix<f64>) -> DVector<f64> {
    j.transpose() * a
}

/// Solves `eta^B(R_A) = delta`, `i_{R_A} omega^B = 0` for every A by least squares.
/// Returns the k vectors and the largest equation residual.
pub fn reeb_fields(etas: &[DVector<f64>], omegas: &[DMatrix<f64>]) -> Result<(Vec<DVector<f64>>, f64)> {
    let k = etas.len();
    if omegas.len() != k || k == 0 {
        return Err(FieldError::ShapeMismatch(format!(
            "{} one-forms but {} two-forms",
            k,
            omegas.len()
        )));
    }
    let d = etas[0].len();
    let rows = k + k * d;
    let mut m = DMatrix::zeros(rows, d);
    for b in 0..k {
        m.row_mut(b).copy_from(&etas[b].transpose());
        // Row block for i_R omega^B: component c is sum_r R^r W[r, c].
        m.view_mut((k + b * d, 0), (d, d)).copy_from(&omegas[b].transpose());
    }
    let mut out = Vec::with_capacity(k);
    let mut worst = 0.0f64;
    for a in 0..k {
        let mut rhs = DVector::zeros(rows);
        rhs[a] = 1.0;
        let (r, _) = linalg::min_norm_solve(&m, &rhs, RANK_RTOL);
        worst = worst.max((&m * &r - &rhs).amax());
        out.push(r);
    }
    Ok((out, worst))
}
