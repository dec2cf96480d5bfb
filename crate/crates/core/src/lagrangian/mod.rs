//! Standard Lagrangian formalism on R^k x T^1_k Q.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::expr::{Compiled, CoordRole, ScalarField};
use crate::forms;
use crate::integrator::second_jet;
use crate::kvector::{solve_trace_system, KVector, KVectorField, SolveOptions};
use crate::linalg;
use crate::models::{ChartKind, ChartPoint, ChartSpec, FieldSection};
use crate::tolerances::RANK_RTOL;

/// A Lagrangian density with its first and second derivatives prepared for evaluation.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    pub k: usize,
    pub n: usize,
    chart: ChartSpec,
    field: ScalarField,
    dv_fields: Vec<ScalarField>,
    value: Compiled,
    dt: Vec<Compiled>,
    dq: Vec<Compiled>,
    dv: Vec<Compiled>,
    tv: Vec<Compiled>,
    qv: Vec<Compiled>,
    vv: Vec<Compiled>,
}

/// Everything about L at one point. Velocity slots are indexed `i*k + A`.
#[derive(Debug, Clone)]
pub struct LagrangianDerivs {
    pub k: usize,
    pub n: usize,
    pub value: f64,
    pub dt: Vec<f64>,
    pub dq: Vec<f64>,
    /// dL/dv^i_A at `i*k + A`
    pub dv: Vec<f64>,
    /// d2L/dt^B dv^i_A at `(i*k + A)*k + B`
    pub tv: Vec<f64>,
    /// d2L/dq^j dv^i_A at `(i*k + A)*n + j`
    pub qv: Vec<f64>,
    /// d2L/dv^j_B dv^i_A, symmetric
    pub hessian: DMatrix<f64>,
}

impl LagrangianDerivs {
    pub fn theta(&self, a: usize, i: usize) -> f64 {
        self.dv[i * self.k + a]
    }

    pub fn tv(&self, i: usize, a: usize, b: usize) -> f64 {
        self.tv[(i * self.k + a) * self.k + b]
    }

    pub fn qv(&self, i: usize, a: usize, j: usize) -> f64 {
        self.qv[(i * self.k + a) * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regularity {
    pub regular: bool,
    pub det: f64,
    pub rank: usize,
}

/// Poincare-Cartan coefficients at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CartanData {
    pub k: usize,
    pub n: usize,
    /// `theta[A][i]` = dL/dv^i_A
    pub theta: Vec<Vec<f64>>,
    /// `time_block[A][i][B]` = d2L/dt^B dv^i_A
    pub time_block: Vec<Vec<Vec<f64>>>,
    /// `base_block[A][i][j]` = d2L/dq^j dv^i_A
    pub base_block: Vec<Vec<Vec<f64>>>,
    /// `hessian[i*k + A][j*k + B]` = d2L/dv^j_B dv^i_A
    pub hessian: Vec<Vec<f64>>,
}

impl CartanData {
    fn chart(&self) -> ChartSpec {
        ChartSpec::lagrangian(self.k, self.n)
    }

    /// theta_L^A as a covector on the Lagrangian chart.
    pub fn theta_form(&self, a: usize) -> DVector<f64> {
        let c = self.chart();
        let mut th = DVector::zeros(c.dim());
        for i in 0..self.n {
            th[c.q(i)] = self.theta[a][i];
        }
        th
    }

    /// omega_L^A = dq^i ^ d(dL/dv^i_A) as a matrix on the Lagrangian chart.
    pub fn omega_form(&self, a: usize) -> DMatrix<f64> {
        let c = self.chart();
        let d = c.dim();
        let mut w = DMatrix::zeros(d, d);
        for i in 0..self.n {
            let mut g = DVector::zeros(d);
            for b in 0..self.k {
                g[c.t(b)] = self.time_block[a][i][b];
            }
            for j in 0..self.n {
                g[c.q(j)] = self.base_block[a][i][j];
            }
            for j in 0..self.n {
                for b in 0..self.k {
                    g[c.v(j, b)] = self.hessian[i * self.k + a][j * self.k + b];
                }
            }
            w += forms::wedge(&forms::basis(d, c.q(i)), &g);
        }
        w
    }
}

/// First and second t-derivatives of a map t -> q at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondJet {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    /// dq^i/dt^A at `i*k + A`
    pub v: Vec<f64>,
    /// d2q^i/dt^A dt^B at `(i*k + A)*k + B`
    pub a: Vec<f64>,
}

impl SecondJet {
    pub fn zeros(k: usize, n: usize) -> SecondJet {
        SecondJet { t: vec![0.0; k], q: vec![0.0; n], v: vec![0.0; n * k], a: vec![0.0; n * k * k] }
    }

    /// The point (t, q, v) of the Lagrangian chart.
    pub fn point(&self) -> Vec<f64> {
        let mut x = self.t.clone();
        x.extend(&self.q);
        x.extend(&self.v);
        x
    }
}

/// Fiber coefficients (X_A)^i_B of a second-order field, stored `(A*n + i)*k + B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SopdeCoefficients {
    pub k: usize,
    pub n: usize,
    pub x: Vec<f64>,
}

impl SopdeCoefficients {
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.x[(a * self.n + i) * self.k + b]
    }

    /// Full k-vector at the Lagrangian point `x`.
    pub fn to_kvector(&self, x: &[f64]) -> KVector {
        let chart = ChartSpec::lagrangian(self.k, self.n);
        let mut out = KVector::canonical_time(chart);
        for a in 0..self.k {
            for i in 0..self.n {
                out.set(a, chart.q(i), x[chart.v(i, a)]);
                for b in 0..self.k {
                    out.set(a, chart.v(i, b), self.get(a, i, b));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReebFields {
    /// k vectors of Lagrangian-chart components.
    pub vectors: Vec<Vec<f64>>,
    /// |R_A(E_L) + dL/dt^A| per A.
    pub energy_defect: Vec<f64>,
    /// Largest residual of the defining linear equations.
    pub equation_residual: f64,
}

impl Lagrangian {
    pub fn new(field: ScalarField, k: usize, n: usize) -> Result<Lagrangian> {
        let chart = ChartSpec::new(ChartKind::LagrangianBundle, k, n, 0)?;
        if let Some(s) = field.free_symbols().iter().find(|s| chart.index_of_name(s).is_none()) {
            return Err(FieldError::IllegalCoordinate {
                name: s.clone(),
                context: format!("a Lagrangian with k={k}, n={n}"),
            });
        }
        let names = chart.names();
        let c = |f: &ScalarField| f.compile(&names);
        let name = |r: CoordRole| r.name();
        let tn: Vec<String> = (0..k).map(|a| name(CoordRole::Time { a })).collect();
        let qn: Vec<String> = (0..n).map(|i| name(CoordRole::Base { i })).collect();
        let mut vn = Vec::new();
        for i in 0..n {
            for a in 0..k {
                vn.push(name(CoordRole::Velocity { i, a }));
            }
        }
        let dv_fields: Vec<ScalarField> = vn.iter().map(|v| field.diff(v)).collect();
        let mut tv = Vec::new();
        let mut qv = Vec::new();
        let nk = n * k;
        let mut vv = Vec::with_capacity(nk * nk);
        for (r, g) in dv_fields.iter().enumerate() {
            for t in &tn {
                tv.push(c(&g.diff(t))?);
            }
            for q in &qn {
                qv.push(c(&g.diff(q))?);
            }
            for (s, v) in vn.iter().enumerate() {
                // Mirror the lower triangle later.
                vv.push(if s >= r { c(&g.diff(v))? } else { c(&ScalarField::constant(0.0))? });
            }
        }
        Ok(Lagrangian {
            k,
            n,
            chart,
            value: c(&field)?,
            dt: tn.iter().map(|t| c(&field.diff(t))).collect::<Result<_>>()?,
            dq: qn.iter().map(|q| c(&field.diff(q))).collect::<Result<_>>()?,
            dv: dv_fields.iter().map(c).collect::<Result<_>>()?,
            dv_fields,
            field,
            tv,
            qv,
            vv,
        })
    }

    pub fn chart(&self) -> ChartSpec {
        self.chart
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    /// dL/dv^i_A as a field, indexed `i*k + A`.
    pub fn momentum_fields(&self) -> &[ScalarField] {
        &self.dv_fields
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.chart.dim() {
            return Err(FieldError::DimensionMismatch(format!(
                "Lagrangian chart has dimension {}, got {} values",
                self.chart.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.value.eval(x)
    }

    /// dL/dv at `x`, indexed `i*k + A`.
    pub fn fiber_derivative(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.dv.iter().map(|f| f.eval(x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let nk = self.n * self.k;
        let mut h = DMatrix::zeros(nk, nk);
        for r in 0..nk {
            for s in r..nk {
                let v = self.vv[r * nk + s].eval(x)?;
                h[(r, s)] = v;
                h[(s, r)] = v;
            }
        }
        Ok(h)
    }

    pub fn derivs(&self, x: &[f64]) -> Result<LagrangianDerivs> {
        self.check(x)?;
        let ev = |v: &[Compiled]| v.iter().map(|f| f.eval(x)).collect::<Result<Vec<f64>>>();
        Ok(LagrangianDerivs {
            k: self.k,
            n: self.n,
            value: self.value.eval(x)?,
            dt: ev(&self.dt)?,
            dq: ev(&self.dq)?,
            dv: ev(&self.dv)?,
            tv: ev(&self.tv)?,
            qv: ev(&self.qv)?,
            hessian: self.hessian(x)?,
        })
    }

    /// FL(t, q, v) = (t, q, dL/dv).
    pub fn legendre_map(&self, x: &ChartPoint) -> Result<ChartPoint> {
        x.require(ChartKind::LagrangianBundle)?;
        let dv = self.fiber_derivative(&x.values)?;
        let h = ChartSpec::hamiltonian(self.k, self.n);
        let mut y = ChartPoint::zeros(h);
        y.values[..self.k + self.n].copy_from_slice(&x.values[..self.k + self.n]);
        for a in 0..self.k {
            for i in 0..self.n {
                y.values[h.p(a, i)] = dv[i * self.k + a];
            }
        }
        Ok(y)
    }

    /// Jacobian of the Legendre map (Hamiltonian dim x Lagrangian dim).
    pub fn legendre_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.derivs(x)?;
        let (k, n) = (self.k, self.n);
        let lc = self.chart;
        let hc = ChartSpec::hamiltonian(k, n);
        let mut j = DMatrix::zeros(hc.dim(), lc.dim());
        for s in 0..k + n {
            j[(s, s)] = 1.0;
        }
        for a in 0..k {
            for i in 0..n {
                let r = hc.p(a, i);
                for b in 0..k {
                    j[(r, lc.t(b))] = d.tv(i, a, b);
                }
                for jj in 0..n {
                    j[(r, lc.q(jj))] = d.qv(i, a, jj);
                }
                for jj in 0..n {
                    for b in 0..k {
                        j[(r, lc.v(jj, b))] = d.hessian[(i * k + a, jj * k + b)];
                    }
                }
            }
        }
        Ok(j)
    }

    pub fn is_regular(&self, x: &ChartPoint, tol: f64) -> Result<Regularity> {
        x.require(ChartKind::LagrangianBundle)?;
        let h = self.hessian(&x.values)?;
        let rank = linalg::rank(&h, tol);
        Ok(Regularity { regular: rank == h.nrows(), det: linalg::determinant(&h), rank })
    }

    /// E_L = sum v^i_A dL/dv^i_A - L.
    pub fn energy(&self, x: &ChartPoint) -> Result<f64> {
        x.require(ChartKind::LagrangianBundle)?;
        self.energy_at(&x.values)
    }

    pub fn energy_at(&self, x: &[f64]) -> Result<f64> {
        let dv = self.fiber_derivative(x)?;
        let mut e = -self.value(x)?;
        for i in 0..self.n {
            for a in 0..self.k {
                e += x[self.chart.v(i, a)] * dv[i * self.k + a];
            }
        }
        Ok(e)
    }

    pub fn cartan_data(&self, x: &ChartPoint) -> Result<CartanData> {
        x.require(ChartKind::LagrangianBundle)?;
        let d = self.derivs(&x.values)?;
        let (k, n) = (self.k, self.n);
        Ok(CartanData {
            k,
            n,
            theta: (0..k).map(|a| (0..n).map(|i| d.theta(a, i)).collect()).collect(),
            time_block: (0..k)
                .map(|a| (0..n).map(|i| (0..k).map(|b| d.tv(i, a, b)).collect()).collect())
                .collect(),
            base_block: (0..k)
                .map(|a| (0..n).map(|i| (0..n).map(|j| d.qv(i, a, j)).collect()).collect())
                .collect(),
            hessian: (0..n * k)
                .map(|r| (0..n * k).map(|s| d.hessian[(r, s)]).collect())
                .collect(),
        })
    }

    fn check_jet(&self, jet: &SecondJet) -> Result<()> {
        let (k, n) = (self.k, self.n);
        if jet.t.len() != k || jet.q.len() != n || jet.v.len() != n * k || jet.a.len() != n * k * k
        {
            return Err(FieldError::ShapeMismatch(format!(
                "jet shapes ({}, {}, {}, {}) do not match k={k}, n={n}",
                jet.t.len(),
                jet.q.len(),
                jet.v.len(),
                jet.a.len()
            )));
        }
        Ok(())
    }

    /// sum_A d/dt^A (dL/dv^i_A) - dL/dq^i along the jet.
    pub fn el_residual_on_jet(&self, jet: &SecondJet) -> Result<Vec<f64>> {
        self.check_jet(jet)?;
        let d = self.derivs(&jet.point())?;
        let (k, n) = (self.k, self.n);
        let mut res = vec![0.0; n];
        for (i, r) in res.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..k {
                s += d.tv(i, a, a);
                for j in 0..n {
                    s += d.qv(i, a, j) * jet.v[j * k + a];
                    for b in 0..k {
                        s += d.hessian[(i * k + a, j * k + b)] * jet.a[(j * k + b) * k + a];
                    }
                }
            }
            *r = s - d.dq[i];
        }
        Ok(res)
    }

    /// Residuals at every interior node of a section carrying q (and possibly v).
    /// Jets come from central differences of the q values.
    pub fn el_residual_on_section(&self, s: &FieldSection) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        if s.chart.k != self.k || s.chart.n != self.n {
            return Err(FieldError::DimensionMismatch(format!(
                "section has k={}, n={}, Lagrangian has k={}, n={}",
                s.chart.k, s.chart.n, self.k, self.n
            )));
        }
        if s.grid.counts.iter().any(|&c| c < 3) {
            return Err(FieldError::InvalidGrid("need at least 3 nodes per axis".into()));
        }
        let mut out = Vec::new();
        for node in s.grid.interior_nodes() {
            let jet = lagrangian_jet(s, &node)?;
            let r = self
                .el_residual_on_jet(&jet)
                .map_err(|e| FieldError::AtNode { node: node.clone(), source: Box::new(e) })?;
            out.push((node, r));
        }
        Ok(out)
    }

    /// Right-hand side of the fiber system at `x`, one entry per base coordinate.
    pub fn sopde_rhs(&self, d: &LagrangianDerivs, x: &[f64]) -> Vec<f64> {
        let (k, n) = (self.k, self.n);
        (0..n)
            .map(|i| {
                let mut s = d.dq[i];
                for b in 0..k {
                    s -= d.tv(i, b, b);
                    for j in 0..n {
                        s -= x[self.chart.v(j, b)] * d.qv(i, b, j);
                    }
                }
                s
            })
            .collect()
    }

    /// Left side minus right side of the fiber system for given coefficients.
    pub fn sopde_residual(&self, x: &[f64], c: &SopdeCoefficients) -> Result<Vec<f64>> {
        let d = self.derivs(x)?;
        let rhs = self.sopde_rhs(&d, x);
        let (k, n) = (self.k, self.n);
        Ok((0..n)
            .map(|i| {
                let mut s = 0.0;
                for b in 0..k {
                    for j in 0..n {
                        for cc in 0..k {
                            s += c.get(b, j, cc) * d.hessian[(j * k + cc, i * k + b)];
                        }
                    }
                }
                s - rhs[i]
            })
            .collect())
    }

    pub fn sopde_solve(&self, x: &ChartPoint, opts: &SolveOptions) -> Result<SopdeCoefficients> {
        x.require(ChartKind::LagrangianBundle)?;
        self.sopde_solve_at(&x.values, opts)
    }

    pub fn sopde_solve_at(&self, x: &[f64], opts: &SolveOptions) -> Result<SopdeCoefficients> {
        let d = self.derivs(x)?;
        let rhs = self.sopde_rhs(&d, x);
        let sol = solve_trace_system(&d.hessian, &rhs, self.k, opts)?;
        Ok(SopdeCoefficients { k: self.k, n: self.n, x: sol })
    }

    pub fn reeb_fields(&self, x: &ChartPoint) -> Result<ReebFields> {
        x.require(ChartKind::LagrangianBundle)?;
        let reg = self.is_regular(x, RANK_RTOL)?;
        if !reg.regular {
            return Err(FieldError::SingularHessian { rank: reg.rank, expected: self.n * self.k });
        }
        let cd = self.cartan_data(x)?;
        let dim = self.chart.dim();
        let etas: Vec<DVector<f64>> = (0..self.k).map(|b| forms::basis(dim, b)).collect();
        let omegas: Vec<DMatrix<f64>> = (0..self.k).map(|b| cd.omega_form(b)).collect();
        let (vectors, residual) = forms::reeb_fields(&etas, &omegas)?;
        let grad = self.energy_gradient(&x.values)?;
        let d = self.derivs(&x.values)?;
        let energy_defect = vectors
            .iter()
            .enumerate()
            .map(|(a, r)| (r.dot(&grad) + d.dt[a]).abs())
            .collect();
        Ok(ReebFields {
            vectors: vectors.iter().map(|v| v.iter().cloned().collect()).collect(),
            energy_defect,
            equation_residual: residual,
        })
    }

    /// Gradient of E_L in Lagrangian-chart coordinates.
    pub fn energy_gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        let d = self.derivs(x)?;
        let (k, n) = (self.k, self.n);
        let c = self.chart;
        let mut g = DVector::zeros(c.dim());
        for i in 0..n {
            for a in 0..k {
                let v = x[c.v(i, a)];
                for b in 0..k {
                    g[c.t(b)] += v * d.tv(i, a, b);
                }
                for j in 0..n {
                    g[c.q(j)] += v * d.qv(i, a, j);
                }
                for j in 0..n {
                    for b in 0..k {
                        g[c.v(j, b)] += v * d.hessian[(i * k + a, j * k + b)];
                    }
                }
            }
        }
        for b in 0..k {
            g[c.t(b)] -= d.dt[b];
        }
        for j in 0..n {
            g[c.q(j)] -= d.dq[j];
        }
        Ok(g)
    }
}

/// Second jet of the q components of a section at an interior node.
pub fn lagrangian_jet(s: &FieldSection, node: &[usize]) -> Result<SecondJet> {
    let (k, n) = (s.chart.k, s.chart.n);
    let rec = second_jet(s, node)?;
    let c = s.chart;
    let mut jet = SecondJet::zeros(k, n);
    jet.t = s.grid.time_of(node);
    for i in 0..n {
        let slot = c.q(i);
        jet.q[i] = rec.values[slot];
        for a in 0..k {
            jet.v[i * k + a] = rec.first(slot, a);
            for b in 0..k {
                jet.a[(i * k + a) * k + b] = rec.second(slot, a, b);
            }
        }
    }
    Ok(jet)
}

/// Second-order field of a Lagrangian: canonical part plus solved fiber coefficients.
pub struct SopdeField<'a> {
    pub lagrangian: &'a Lagrangian,
    pub symmetric: bool,
    /// Reference coefficient fields `[A][i][B]` compiled on the Lagrangian chart.
    pub reference: Option<Vec<Compiled>>,
}

impl<'a> SopdeField<'a> {
    pub fn new(lagrangian: &'a Lagrangian) -> Self {
        SopdeField { lagrangian, symmetric: false, reference: None }
    }

    pub fn with_reference(mut self, fields: &[ScalarField]) -> Result<Self> {
        let names = self.lagrangian.chart().names();
        self.reference = Some(fields.iter().map(|f| f.compile(&names)).collect::<Result<_>>()?);
        Ok(self)
    }

    pub fn coefficients(&self, x: &[f64]) -> Result<SopdeCoefficients> {
        let reference = match &self.reference {
            Some(r) => Some(r.iter().map(|c| c.eval(x)).collect::<Result<Vec<f64>>>()?),
            None => None,
        };
        let opts = SolveOptions { symmetric: self.symmetric, reference };
        self.lagrangian.sopde_solve_at(x, &opts)
    }
}

impl KVectorField for SopdeField<'_> {
    fn chart(&self) -> ChartSpec {
        self.lagrangian.chart()
    }

    fn eval(&self, x: &[f64]) -> Result<KVector> {
        Ok(self.coefficients(x)?.to_kvector(x))
    }
}
