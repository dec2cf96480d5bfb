//! k-vector fields: k tangent vectors per point, in chart coordinates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::linalg;
use crate::models::ChartSpec;
use crate::tolerances::{RANK_RTOL, SOLVE_RESIDUAL_RTOL};

/// Components of (X_1, ..., X_k) at one point: `k` vectors of length `chart.dim()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KVector {
    pub chart: ChartSpec,
    pub components: Vec<f64>,
}

impl KVector {
    pub fn zeros(chart: ChartSpec) -> KVector {
        KVector { chart, components: vec![0.0; chart.k * chart.dim()] }
    }

    /// All time blocks set to the identity, everything else zero.
    pub fn canonical_time(chart: ChartSpec) -> KVector {
        let mut x = Self::zeros(chart);
        for a in 0..chart.k {
            x.set(a, chart.t(a), 1.0);
        }
        x
    }

    pub fn vector(&self, a: usize) -> &[f64] {
        let d = self.chart.dim();
        &self.components[a * d..(a + 1) * d]
    }

    pub fn get(&self, a: usize, slot: usize) -> f64 {
        self.components[a * self.chart.dim() + slot]
    }

    pub fn set(&mut self, a: usize, slot: usize, v: f64) {
        let d = self.chart.dim();
        self.components[a * d + slot] = v;
    }

    /// Largest deviation of the (X_A)^B block from the identity.
    pub fn time_defect(&self) -> f64 {
        let k = self.chart.k;
        let mut d = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                let want = if a == b { 1.0 } else { 0.0 };
                d = d.max((self.get(a, self.chart.t(b)) - want).abs());
            }
        }
        d
    }
}

/// Coefficient evaluator of a k-vector field. Must be pure.
pub trait KVectorField: Sync {
    fn chart(&self) -> ChartSpec;
    fn eval(&self, x: &[f64]) -> Result<KVector>;
}

/// A k-vector field given by a closure.
pub struct FnField<F> {
    pub chart: ChartSpec,
    pub f: F,
}

impl<F> KVectorField for FnField<F>
where
    F: Fn(&[f64]) -> Result<KVector> + Sync,
{
    fn chart(&self) -> ChartSpec {
        self.chart
    }

    fn eval(&self, x: &[f64]) -> Result<KVector> {
        (self.f)(x)
    }
}

/// The same coefficients at every point.
pub struct ConstantField(pub KVector);

impl KVectorField for ConstantField {
    fn chart(&self) -> ChartSpec {
        self.0.chart
    }

    fn eval(&self, _x: &[f64]) -> Result<KVector> {
        Ok(self.0.clone())
    }
}

/// How to pick one solution of the underdetermined second-order fiber system.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Impose (X_A)^i_B = (X_B)^i_A.
    pub symmetric: bool,
    /// Reference coefficients `[A][i][B]`; the returned solution is the one
    /// closest to it. `None` means the zero reference (minimum norm).
    pub reference: Option<Vec<f64>>,
}

/// Solves the trace system
///   sum_{A, j, B} W[(j,B),(i,A)] X[A][j][B] = rhs[i]   for i = 0..f
/// where `hess` is the (f*k)x(f*k) fiber Hessian indexed `j*k + B`.
/// Unknowns are returned `[A][j][B]`, flattened `(A*f + j)*k + B`.
pub fn solve_trace_system(
    hess: &DMatrix<f64>,
    rhs: &[f64],
    k: usize,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let f = rhs.len();
    let nk = f * k;
    if hess.shape() != (nk, nk) {
        return Err(FieldError::ShapeMismatch(format!(
            "fiber Hessian is {:?}, expected {nk}x{nk}",
            hess.shape()
        )));
    }
    let r = linalg::rank(hess, RANK_RTOL);
    if r < nk {
        return Err(FieldError::SingularHessian { rank: r, expected: nk });
    }
    let nu = k * f * k;
    let uidx = |a: usize, j: usize, b: usize| (a * f + j) * k + b;
    let mut m = DMatrix::zeros(f, nu);
    for i in 0..f {
        for a in 0..k {
            for j in 0..f {
                for b in 0..k {
                    m[(i, uidx(a, j, b))] = hess[(j * k + b, i * k + a)];
                }
            }
        }
    }
    let mut x_ref = match &opts.reference {
        Some(r) if r.len() != nu => {
            return Err(FieldError::ShapeMismatch(format!(
                "reference has {} entries, expected {nu}",
                r.len()
            )))
        }
        Some(r) => r.clone(),
        None => vec![0.0; nu],
    };
    if opts.symmetric {
        let sym = x_ref.clone();
        for a in 0..k {
            for j in 0..f {
                for b in 0..k {
                    x_ref[uidx(a, j, b)] = 0.5 * (sym[uidx(a, j, b)] + sym[uidx(b, j, a)]);
                }
            }
        }
    }
    let xr = DVector::from_vec(x_ref.clone());
    let b = DVector::from_vec(rhs.to_vec()) - &m * &xr;

    let delta = if opts.symmetric {
        // Parameters p(j, A<=B); off-diagonal entries carry p/sqrt(2) so that
        // the parameter norm equals the Frobenius norm of the correction.
        let mut map: Vec<Vec<(usize, f64)>> = Vec::new();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..f {
            for a in 0..k {
                for bb in a..k {
                    if a == bb {
                        map.push(vec![(uidx(a, j, a), 1.0)]);
                    } else {
                        map.push(vec![(uidx(a, j, bb), s), (uidx(bb, j, a), s)]);
                    }
                }
            }
        }
        let mut sm = DMatrix::zeros(nu, map.len());
        for (c, entries) in map.iter().enumerate() {
            for &(u, w) in entries {
                sm[(u, c)] = w;
            }
        }
        let (p, _) = linalg::min_norm_solve(&(&m * &sm), &b, RANK_RTOL);
        &sm * p
    } else {
        linalg::min_norm_solve(&m, &b, RANK_RTOL).0
    };
    let x = xr + delta;
    let res = (&m * &x - DVector::from_vec(rhs.to_vec())).norm();
    let scale = 1.0 + DVector::from_vec(rhs.to_vec()).norm() + m.norm() * x.norm();
    if res > SOLVE_RESIDUAL_RTOL * scale {
        return Err(FieldError::SingularHessian { rank: linalg::rank(&m, RANK_RTOL), expected: f });
    }
    Ok(x.iter().cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_equation_min_norm() {
        // k = 2, one fiber coordinate, identity Hessian, rhs -1.
        let w = DMatrix::identity(2, 2);
        let x = solve_trace_system(&w, &[-1.0], 2, &SolveOptions::default()).unwrap();
        assert_eq!(x.len(), 4);
        assert!((x[0] + 0.5).abs() < 1e-15 && (x[3] + 0.5).abs() < 1e-15);
        assert!(x[1].abs() < 1e-15 && x[2].abs() < 1e-15);
    }

    #[test]
    fn symmetric_mode_respects_reference() {
        let w = DMatrix::identity(2, 2);
        let opts = SolveOptions { symmetric: true, reference: Some(vec![0.0, 1.0, 3.0, 0.0]) };
        let x = solve_trace_system(&w, &[0.0], 2, &opts).unwrap();
        assert!((x[1] - 2.0).abs() < 1e-15 && (x[2] - 2.0).abs() < 1e-15);
        assert!(x[0].abs() < 1e-15 && x[3].abs() < 1e-15);
    }

    #[test]
    fn singular_hessian_rejected() {
        let w = DMatrix::zeros(2, 2);
        assert!(matches!(
            solve_trace_system(&w, &[0.0], 2, &SolveOptions::default()),
            Err(FieldError::SingularHessian { rank: 0, expected: 2 })
        ));
    }

    #[test]
    fn canonical_time_block() {
        let c = ChartSpec::lagrangian(3, 1);
        let x = KVector::canonical_time(c);
        assert_eq!(x.time_defect(), 0.0);
        assert_eq!(KVector::zeros(c).time_defect(), 1.0);
    }
}
