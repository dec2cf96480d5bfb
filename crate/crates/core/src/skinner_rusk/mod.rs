//! Unified formalism on the Whitney sum of the velocity and momentum bundles.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::expr::{Compiled, CoordRole, ScalarField};
use crate::kvector::{KVector, KVectorField, SolveOptions};
use crate::lagrangian::{Lagrangian, SopdeField};
use crate::linalg;
use crate::models::{ChartKind, ChartPoint, ChartSpec, FieldSection};
use crate::tolerances::{GRAPH_TOL, PROJECTION_MAX_ITER, PROJECTION_TOL, RANK_RTOL};

fn whitney_of(l: &Lagrangian) -> ChartSpec {
    ChartSpec::whitney(l.k, l.n)
}

fn require(l: &Lagrangian, x: &[f64]) -> Result<ChartSpec> {
    let c = whitney_of(l);
    if x.len() != c.dim() {
        return Err(FieldError::DimensionMismatch(format!(
            "Whitney chart has dimension {}, got {} values",
            c.dim(),
            x.len()
        )));
    }
    Ok(c)
}

/// (t, q, v) part of a Whitney point.
pub fn pr1(c: ChartSpec, x: &[f64]) -> Vec<f64> {
    x[..c.k + c.n + c.n * c.k].to_vec()
}

/// (t, q, p) part of a Whitney point.
pub fn pr2(c: ChartSpec, x: &[f64]) -> Vec<f64> {
    let mut y = x[..c.k + c.n].to_vec();
    y.extend(&x[c.k + c.n + c.n * c.k..]);
    y
}

/// sum p^A_i v^i_A.
pub fn coupling(x: &ChartPoint) -> Result<f64> {
    x.require(ChartKind::WhitneySum)?;
    let c = x.chart;
    let mut s = 0.0;
    for a in 0..c.k {
        for i in 0..c.n {
            s += x.values[c.p(a, i)] * x.values[c.v(i, a)];
        }
    }
    Ok(s)
}

/// H = coupling - L.
pub fn sr_hamiltonian(l: &Lagrangian, x: &ChartPoint) -> Result<f64> {
    require(l, &x.values)?;
    Ok(coupling(x)? - l.value(&pr1(x.chart, &x.values))?)
}

/// p^A_i - dL/dv^i_A, indexed `A*n + i`.
pub fn ml_residual(l: &Lagrangian, x: &[f64]) -> Result<Vec<f64>> {
    let c = require(l, x)?;
    let dv = l.fiber_derivative(&pr1(c, x))?;
    let mut r = vec![0.0; l.k * l.n];
    for a in 0..l.k {
        for i in 0..l.n {
            r[a * l.n + i] = x[c.p(a, i)] - dv[i * l.k + a];
        }
    }
    Ok(r)
}

/// The point of the graph of FL over a Lagrangian point.
pub fn graph_point(l: &Lagrangian, x: &[f64]) -> Result<ChartPoint> {
    let y = l.legendre_map(&ChartPoint::new(l.chart(), x.to_vec())?)?;
    let c = whitney_of(l);
    let mut v = x.to_vec();
    v.extend(&y.values[l.k + l.n..]);
    ChartPoint::new(c, v)
}

/// A general solution of the dynamical equations on the graph: time and
/// SOPDE blocks fixed, velocity block the arbitrary `xi` (`[A][i][B]`), and
/// momentum block the equal split of dL/dq.
pub fn dynamical_kvector(l: &Lagrangian, x: &[f64], xi: &[f64]) -> Result<KVector> {
    let c = require(l, x)?;
    let (k, n) = (l.k, l.n);
    if xi.len() != k * n * k {
        return Err(FieldError::ShapeMismatch(format!("xi has {} entries, expected {}", xi.len(), k * n * k)));
    }
    let d = l.derivs(&pr1(c, x))?;
    let mut z = KVector::canonical_time(c);
    for a in 0..k {
        for i in 0..n {
            z.set(a, c.q(i), x[c.v(i, a)]);
            for b in 0..k {
                z.set(a, c.v(i, b), xi[(a * n + i) * k + b]);
            }
            z.set(a, c.p(a, i), d.dq[i] / k as f64);
        }
    }
    Ok(z)
}

/// Residual groups of the unified equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnifiedResidual {
    /// (Z_A)^B - delta
    pub time: Vec<f64>,
    /// (Z_A)^i - v^i_A
    pub sopde: Vec<f64>,
    /// sum_A (Z_A)^A_i - dL/dq^i
    pub trace: Vec<f64>,
    /// p - dL/dv
    pub constraint: Vec<f64>,
}

impl UnifiedResidual {
    pub fn max_abs(&self) -> f64 {
        [&self.time, &self.sopde, &self.trace, &self.constraint]
            .iter()
            .map(|v| linalg::max_abs(v))
            .fold(0.0, f64::max)
    }
}

/// Residuals of sum_A i_{Z_A} Omega^A = dH - sum_A dH/dt^A dt^A in coordinates.
pub fn s3_residual(l: &Lagrangian, x: &[f64], z: &KVector) -> Result<UnifiedResidual> {
    let c = require(l, x)?;
    let (k, n) = (l.k, l.n);
    let d = l.derivs(&pr1(c, x))?;
    let mut time = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            time.push(z.get(a, c.t(b)) - if a == b { 1.0 } else { 0.0 });
        }
    }
    let mut sopde = Vec::with_capacity(k * n);
    for a in 0..k {
        for i in 0..n {
            sopde.push(z.get(a, c.q(i)) - x[c.v(i, a)]);
        }
    }
    let trace = (0..n).map(|i| (0..k).map(|a| z.get(a, c.p(a, i))).sum::<f64>() - d.dq[i]).collect();
    Ok(UnifiedResidual { time, sopde, trace, constraint: ml_residual(l, x)? })
}

/// Z_A(p^B_j - dL/dv^j_B) at `(A*k + B)*n + j`.
pub fn tangency_defect(l: &Lagrangian, x: &[f64], z: &KVector) -> Result<Vec<f64>> {
    let c = require(l, x)?;
    let (k, n) = (l.k, l.n);
    let d = l.derivs(&pr1(c, x))?;
    let mut out = Vec::with_capacity(k * k * n);
    for a in 0..k {
        for b in 0..k {
            for j in 0..n {
                let mut s = z.get(a, c.p(b, j)) - z.get(a, c.t(a)) * d.tv(j, b, a);
                for i in 0..n {
                    s -= z.get(a, c.q(i)) * d.qv(j, b, i);
                    for cc in 0..k {
                        s -= z.get(a, c.v(i, cc)) * d.hessian[(j * k + b, i * k + cc)];
                    }
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Unified k-vector at a graph point of a regular Lagrangian.
///
/// Starts from the general dynamical solution with velocity block `xi` and
/// imposes tangency to the graph, which fixes both fiber blocks.
pub fn sr_kvector(l: &Lagrangian, x: &[f64], xi: &[f64], opts: &SolveOptions) -> Result<KVector> {
    let c = require(l, x)?;
    let (k, n) = (l.k, l.n);
    let pnorm: f64 = (0..k * n).map(|r| x[c.k + c.n + c.n * c.k + r].powi(2)).sum::<f64>().sqrt();
    let defect = linalg::max_abs(&ml_residual(l, x)?);
    if defect > GRAPH_TOL * (1.0 + pnorm) {
        return Err(FieldError::OffGraph { defect });
    }
    let mut z = dynamical_kvector(l, x, xi)?;
    let xl = pr1(c, x);
    let sol = l.sopde_solve_at(&xl, opts)?;
    let d = l.derivs(&xl)?;
    for a in 0..k {
        for i in 0..n {
            for b in 0..k {
                z.set(a, c.v(i, b), sol.get(a, i, b));
            }
        }
        for b in 0..k {
            for j in 0..n {
                let mut s = d.tv(j, b, a);
                for i in 0..n {
                    s += xl[c.v(i, a)] * d.qv(j, b, i);
                    for cc in 0..k {
                        s += sol.get(a, i, cc) * d.hessian[(j * k + b, i * k + cc)];
                    }
                }
                z.set(a, c.p(b, j), s);
            }
        }
    }
    let r = s3_residual(l, x, &z)?;
    let scale = 1.0 + linalg::max_abs(&d.dq);
    if linalg::max_abs(&r.trace) > 1e-10 * scale {
        return Err(FieldError::SingularHessian { rank: linalg::rank(&d.hessian, RANK_RTOL), expected: n * k });
    }
    Ok(z)
}

/// The unified k-vector field of a regular Lagrangian, for integration on the graph.
pub struct SrField<'a> {
    pub sopde: SopdeField<'a>,
}

impl<'a> SrField<'a> {
    pub fn new(l: &'a Lagrangian) -> Self {
        SrField { sopde: SopdeField::new(l) }
    }
}

impl KVectorField for SrField<'_> {
    fn chart(&self) -> ChartSpec {
        whitney_of(self.sopde.lagrangian)
    }

    fn eval(&self, x: &[f64]) -> Result<KVector> {
        let l = self.sopde.lagrangian;
        let c = self.chart();
        let reference = match &self.sopde.reference {
            Some(r) => Some(r.iter().map(|f| f.eval(&pr1(c, x))).collect::<Result<Vec<f64>>>()?),
            None => None,
        };
        let opts = SolveOptions { symmetric: self.sopde.symmetric, reference };
        let xi = vec![0.0; l.k * l.n * l.k];
        // Integration drifts off the graph at round-off level; the check uses GRAPH_TOL.
        sr_kvector(l, x, &xi, &opts)
    }
}

/// Both projections of a unified section.
#[derive(Debug, Clone)]
pub struct ProjectedSolution {
    pub psi_l: FieldSection,
    pub psi_h: FieldSection,
    /// max over nodes of |p - dL/dv|
    pub graph_defect: f64,
}

pub fn project_solution(l: &Lagrangian, s: &FieldSection) -> Result<ProjectedSolution> {
    let c = whitney_of(l);
    if s.chart != c {
        return Err(FieldError::DimensionMismatch(format!(
            "expected a section on the Whitney chart with k={}, n={}",
            l.k, l.n
        )));
    }
    let psi_l = s.map(l.chart(), |x| Ok(pr1(c, x)))?;
    let psi_h = s.map(ChartSpec::hamiltonian(l.k, l.n), |x| Ok(pr2(c, x)))?;
    let mut graph_defect = 0.0f64;
    for node in 0..s.node_count() {
        let r = ml_residual(l, s.at(node))
            .map_err(|e| FieldError::AtNode { node: s.grid.multi(node), source: Box::new(e) })?;
        graph_defect = graph_defect.max(r.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(ProjectedSolution { psi_l, psi_h, graph_defect })
}

/// A constraint function on the Whitney chart with its gradient.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub field: ScalarField,
    value: Compiled,
    grad: Vec<Compiled>,
}

impl Constraint {
    pub fn new(name: String, field: ScalarField, c: ChartSpec) -> Result<Constraint> {
        let names = c.names();
        Ok(Constraint {
            name,
            value: field.compile(&names)?,
            grad: names.iter().map(|n| field.diff(n).compile(&names)).collect::<Result<_>>()?,
            field,
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.value.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.grad.iter().map(|g| g.eval(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSummary {
    pub name: String,
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintLevel {
    pub level: usize,
    /// Constraints introduced at this level.
    pub constraints: Vec<ConstraintSummary>,
    /// Rank of the Jacobian of all constraints so far, per sample.
    pub constraint_ranks: Vec<usize>,
    /// Local dimension of the constraint set, per sample.
    pub dimensions: Vec<usize>,
    /// Rank of the linear tangency system, per sample.
    pub tangency_ranks: Vec<usize>,
    /// Largest inconsistency of the tangency system over the samples.
    pub inconsistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub regular: bool,
    pub levels: Vec<ConstraintLevel>,
    pub final_level: usize,
    pub terminated: bool,
    /// Samples where a point-dependent obstruction was detected but no
    /// constant combination could be extracted.
    pub unresolved: usize,
}

impl ConstraintReport {
    pub fn all_constraints(&self) -> Vec<&ConstraintSummary> {
        self.levels.iter().flat_map(|l| l.constraints.iter()).collect()
    }
}

/// Level-0 constraints p^A_i - dL/dv^i_A.
pub fn level0_constraints(l: &Lagrangian) -> Result<Vec<Constraint>> {
    let c = whitney_of(l);
    let m = l.momentum_fields();
    let mut out = Vec::new();
    for a in 0..l.k {
        for i in 0..l.n {
            let p = ScalarField::var(&CoordRole::Momentum { a, i }.name());
            let f = p.sub(&m[i * l.k + a]);
            out.push(Constraint::new(format!("phi0_{}_{}", a + 1, i + 1), f, c)?);
        }
    }
    Ok(out)
}

/// Gauss-Newton projection of `x` onto the zero set of `cs`.
pub fn project_onto(cs: &[Constraint], x: &[f64]) -> Result<Vec<f64>> {
    let mut x = x.to_vec();
    for it in 0..PROJECTION_MAX_ITER {
        let phi = DVector::from_vec(cs.iter().map(|c| c.eval(&x)).collect::<Result<Vec<_>>>()?);
        let scale = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if phi.norm() <= PROJECTION_TOL * scale {
            return Ok(x);
        }
        let rows = cs.iter().map(|c| c.gradient(&x)).collect::<Result<Vec<_>>>()?;
        let j = DMatrix::from_fn(cs.len(), x.len(), |r, s| rows[r][s]);
        let (dx, _) = linalg::min_norm_solve(&j, &phi, RANK_RTOL);
        if dx.amax() == 0.0 {
            return Err(FieldError::NonConvergence { iterations: it, residual: phi.norm() });
        }
        for (xi, d) in x.iter_mut().zip(dx.iter()) {
            *xi -= d;
        }
    }
    Err(FieldError::NonConvergence { iterations: PROJECTION_MAX_ITER, residual: f64::NAN })
}

/// Builds the tangency system at `x`: unknowns (Z_A)^i_C then (Z_A)^B_j.
/// Rows: the trace condition (n), then Z_A(phi) = 0 for each constraint and A.
/// Returns (M, b, symbolic right-hand sides).
fn tangency_system(l: &Lagrangian, cs: &[Constraint], x: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let c = whitney_of(l);
    let (k, n) = (l.k, l.n);
    let nv = k * n * k;
    let nu = nv + k * k * n;
    let zv = |a: usize, i: usize, cc: usize| (a * n + i) * k + cc;
    let zp = |a: usize, b: usize, j: usize| nv + (a * k + b) * n + j;
    let rows = n + cs.len() * k;
    let mut m = DMatrix::zeros(rows, nu);
    let mut b = DVector::zeros(rows);
    let d = l.derivs(&pr1(c, x))?;
    for i in 0..n {
        for a in 0..k {
            m[(i, zp(a, a, i))] = 1.0;
        }
        b[i] = d.dq[i];
    }
    for (r, con) in cs.iter().enumerate() {
        let g = con.gradient(x)?;
        for a in 0..k {
            let row = n + r * k + a;
            let mut rhs = -g[c.t(a)];
            for i in 0..n {
                rhs -= x[c.v(i, a)] * g[c.q(i)];
                for cc in 0..k {
                    m[(row, zv(a, i, cc))] = g[c.v(i, cc)];
                }
            }
            for bb in 0..k {
                for j in 0..n {
                    m[(row, zp(a, bb, j))] = g[c.p(bb, j)];
                }
            }
            b[row] = rhs;
        }
    }
    Ok((m, b))
}

/// Symbolic right-hand side of tangency row `row` (see [`tangency_system`]).
fn row_rhs_field(l: &Lagrangian, cs: &[Constraint], row: usize) -> ScalarField {
    let (k, n) = (l.k, l.n);
    if row < n {
        return l.field().diff(&CoordRole::Base { i: row }.name());
    }
    let r = (row - n) / k;
    let a = (row - n) % k;
    let f = &cs[r].field;
    let mut s = f.diff(&CoordRole::Time { a }.name()).scale(-1.0);
    for i in 0..n {
        let v = ScalarField::var(&CoordRole::Velocity { i, a }.name());
        s = s.sub(&v.mul(&f.diff(&CoordRole::Base { i }.name())));
    }
    s
}

/// Reduced row echelon form with small entries dropped and near-integers rounded.
fn canonical_rref(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let piv = (r..rows).max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs())).unwrap();
        if a[(piv, col)].abs() < 1e-9 {
            continue;
        }
        a.swap_rows(r, piv);
        let p = a[(r, col)];
        for j in 0..cols {
            a[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, col)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        r += 1;
    }
    a.iter_mut().for_each(|v| {
        if v.abs() < 1e-12 {
            *v = 0.0;
        } else if (*v - v.round()).abs() < 1e-9 {
            *v = v.round();
        }
    });
    a
}

fn jacobian_rank(cs: &[Constraint], x: &[f64]) -> Result<usize> {
    let rows = cs.iter().map(|c| c.gradient(x)).collect::<Result<Vec<_>>>()?;
    let j = DMatrix::from_fn(cs.len(), x.len(), |r, s| rows[r][s]);
    Ok(linalg::rank(&j, RANK_RTOL))
}

/// Pointwise constraint algorithm started from the graph of FL.
///
/// At each level the tangency system is tested for solvability at every
/// sample; constant left-null combinations of an inconsistent or
/// rank-deficient system yield new constraint functions.
pub fn constraint_algorithm(
    l: &Lagrangian,
    samples: &[ChartPoint],
    tol: f64,
    max_levels: usize,
) -> Result<ConstraintReport> {
    let c = whitney_of(l);
    if samples.is_empty() {
        return Err(FieldError::Config("the constraint algorithm needs sample points".into()));
    }
    for s in samples {
        s.require(ChartKind::WhitneySum)?;
        if s.chart != c {
            return Err(FieldError::DimensionMismatch("sample chart does not match the Lagrangian".into()));
        }
    }
    let mut cs = level0_constraints(l)?;
    let mut pts: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| project_onto(&cs, &s.values))
        .collect::<Result<_>>()?;
    let dim = c.dim();
    let summarize = |list: &[Constraint]| {
        list.iter()
            .map(|c| ConstraintSummary { name: c.name.clone(), expression: c.field.to_string() })
            .collect::<Vec<_>>()
    };
    let ranks0 = pts.iter().map(|x| jacobian_rank(&cs, x)).collect::<Result<Vec<_>>>()?;
    let mut levels = vec![ConstraintLevel {
        level: 0,
        constraints: summarize(&cs),
        dimensions: ranks0.iter().map(|r| dim - r).collect(),
        constraint_ranks: ranks0,
        tangency_ranks: Vec::new(),
        inconsistency: 0.0,
    }];
    let regular = pts.iter().all(|x| {
        l.hessian(&pr1(c, x)).map(|h| linalg::rank(&h, RANK_RTOL) == h.nrows()).unwrap_or(false)
    });
    if regular {
        return Ok(ConstraintReport { regular, levels, final_level: 0, terminated: true, unresolved: 0 });
    }

    let mut unresolved = 0;
    for level in 1..=max_levels {
        let mut inconsistency = 0.0f64;
        let mut tangency_ranks = Vec::with_capacity(pts.len());
        let mut reference: Option<DMatrix<f64>> = None;
        let mut constant = true;
        for x in &pts {
            let (m, b) = tangency_system(l, &cs, x)?;
            tangency_ranks.push(linalg::rank(&m, RANK_RTOL));
            let inc = linalg::inconsistency(&m, &b, RANK_RTOL);
            inconsistency = inconsistency.max(inc / (1.0 + b.norm()));
            let null = linalg::left_null_space(&m, RANK_RTOL);
            let form = canonical_rref(null.transpose());
            match &reference {
                None => reference = Some(form),
                Some(r) => {
                    if r.shape() != form.shape() || (r - &form).amax() > 1e-9 {
                        constant = false;
                    }
                }
            }
        }
        let mut fresh = Vec::new();
        if constant {
            let form = reference.expect("at least one sample");
            for row in 0..form.nrows() {
                if form.row(row).amax() == 0.0 {
                    continue;
                }
                let mut f = ScalarField::constant(0.0);
                for col in 0..form.ncols() {
                    let w = form[(row, col)];
                    if w != 0.0 {
                        f = f.add(&row_rhs_field(l, &cs, col).scale(w));
                    }
                }
                let cand = Constraint::new(format!("phi{}_{}", level, fresh.len() + 1), f, c)?;
                if !vanishes_near(&cand, &pts, tol)? {
                    fresh.push(cand);
                }
            }
        } else if inconsistency > tol {
            unresolved += pts.len();
        }
        // Keep only constraints that raise the Jacobian rank.
        let mut accepted = Vec::new();
        for cand in fresh {
            let mut trial = cs.clone();
            trial.extend(accepted.iter().cloned());
            let before = jacobian_rank(&trial, &pts[0])?;
            trial.push(cand.clone());
            if jacobian_rank(&trial, &pts[0])? > before {
                accepted.push(cand);
            }
        }
        let added = !accepted.is_empty();
        cs.extend(accepted.iter().cloned());
        if added {
            pts = pts.iter().map(|x| project_onto(&cs, x)).collect::<Result<_>>()?;
        }
        let ranks = pts.iter().map(|x| jacobian_rank(&cs, x)).collect::<Result<Vec<_>>>()?;
        levels.push(ConstraintLevel {
            level,
            constraints: summarize(&accepted),
            dimensions: ranks.iter().map(|r| dim - r).collect(),
            constraint_ranks: ranks,
            tangency_ranks,
            inconsistency,
        });
        if !added {
            return Ok(ConstraintReport { regular, levels, final_level: level, terminated: true, unresolved });
        }
    }
    Ok(ConstraintReport { regular, levels, final_level: max_levels, terminated: false, unresolved })
}

/// True when `c` is zero at the samples and at random-ish perturbations off them.
fn vanishes_near(c: &Constraint, pts: &[Vec<f64>], tol: f64) -> Result<bool> {
    for (s, x) in pts.iter().enumerate() {
        for probe in 0..4 {
            let mut y = x.clone();
            if probe > 0 {
                for (j, v) in y.iter_mut().enumerate() {
                    // Deterministic scatter, no RNG needed for a vanishing test.
                    let phase = (s * 31 + j * 7 + probe * 13) as f64;
                    *v += 0.37 * phase.sin();
                }
            }
            let val = c.eval(&y)?;
            let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if val.abs() > tol * scale {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
