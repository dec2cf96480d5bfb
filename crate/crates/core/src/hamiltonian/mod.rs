//! Hamiltonian (de Donder-Weyl) side on R^k x (T^1_k)^* Q.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::expr::{Compiled, ScalarField};
use crate::forms;
use crate::integrator::second_jet;
use crate::kvector::{KVector, KVectorField};
use crate::lagrangian::Lagrangian;
use crate::linalg;
use crate::models::{ChartKind, ChartPoint, ChartSpec, FieldSection};
use crate::tolerances::{NEWTON_MAX_ITER, NEWTON_TOL, RANK_RTOL};

/// Value and first derivatives of a Hamiltonian at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamGradient {
    pub value: f64,
    pub dt: Vec<f64>,
    pub dq: Vec<f64>,
    /// dH/dp^A_i (or dH/dw^A_alpha) at `A*f + i`, `f` the fiber rank.
    pub dp: Vec<f64>,
}

impl HamGradient {
    pub fn dp(&self, a: usize, i: usize) -> f64 {
        self.dp[a * (self.dp.len() / self.dt.len()) + i]
    }
}

/// A function on a momentum chart with first derivatives.
pub trait HamiltonianFunction: Sync {
    fn chart(&self) -> ChartSpec;
    fn gradient(&self, x: &[f64]) -> Result<HamGradient>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.gradient(x)?.value)
    }
}

/// A Hamiltonian given as an expression.
#[derive(Debug, Clone)]
pub struct ExprHamiltonian {
    chart: ChartSpec,
    field: ScalarField,
    value: Compiled,
    derivs: Vec<Compiled>,
}

impl ExprHamiltonian {
    /// `chart` is a Hamiltonian bundle or an algebroid momentum chart.
    pub fn new(field: ScalarField, chart: ChartSpec) -> Result<ExprHamiltonian> {
        if !matches!(chart.kind, ChartKind::HamiltonianBundle | ChartKind::AlgebroidMom) {
            return Err(FieldError::Config(format!(
                "a Hamiltonian lives on a momentum chart, not {:?}",
                chart.kind
            )));
        }
        if let Some(s) = field.free_symbols().iter().find(|s| chart.index_of_name(s).is_none()) {
            return Err(FieldError::IllegalCoordinate {
                name: s.clone(),
                context: format!("a Hamiltonian on {:?}", chart.kind),
            });
        }
        let names = chart.names();
        let value = field.compile(&names)?;
        let derivs = names.iter().map(|n| field.diff(n).compile(&names)).collect::<Result<_>>()?;
        Ok(ExprHamiltonian { chart, field, value, derivs })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }
}

impl HamiltonianFunction for ExprHamiltonian {
    fn chart(&self) -> ChartSpec {
        self.chart
    }

    fn gradient(&self, x: &[f64]) -> Result<HamGradient> {
        check_dim(self.chart, x)?;
        let (k, n) = (self.chart.k, self.chart.n);
        let g = self.derivs.iter().map(|c| c.eval(x)).collect::<Result<Vec<f64>>>()?;
        Ok(HamGradient {
            value: self.value.eval(x)?,
            dt: g[..k].to_vec(),
            dq: g[k..k + n].to_vec(),
            dp: g[k + n..].to_vec(),
        })
    }
}

fn check_dim(chart: ChartSpec, x: &[f64]) -> Result<()> {
    if x.len() != chart.dim() {
        return Err(FieldError::DimensionMismatch(format!(
            "{:?} chart has dimension {}, got {} values",
            chart.kind,
            chart.dim(),
            x.len()
        )));
    }
    Ok(())
}

/// Result of inverting the Legendre map at one momentum point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendreInverse {
    pub h_value: f64,
    /// Preimage velocities, indexed `i*k + A`.
    pub v: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves dL/dv(t, q, v) = p for v by damped Newton and returns E_L there.
pub fn hamiltonian_from_lagrangian(
    l: &Lagrangian,
    y: &ChartPoint,
    v0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<LegendreInverse> {
    y.require(ChartKind::HamiltonianBundle)?;
    let (k, n) = (l.k, l.n);
    if y.chart.k != k || y.chart.n != n {
        return Err(FieldError::DimensionMismatch(format!(
            "momentum point has k={}, n={}, Lagrangian has k={k}, n={n}",
            y.chart.k, y.chart.n
        )));
    }
    let h = y.chart;
    let lc = l.chart();
    let nk = n * k;
    let mut p = DVector::zeros(nk);
    for a in 0..k {
        for i in 0..n {
            p[i * k + a] = y.values[h.p(a, i)];
        }
    }
    let mut x = vec![0.0; lc.dim()];
    x[..k + n].copy_from_slice(&y.values[..k + n]);
    match v0 {
        Some(v) if v.len() != nk => {
            return Err(FieldError::ShapeMismatch(format!("initial guess has {} entries, expected {nk}", v.len())))
        }
        Some(v) => x[k + n..].copy_from_slice(v),
        None => x[k + n..].copy_from_slice(p.as_slice()),
    }
    let resid = |x: &[f64]| -> Result<DVector<f64>> {
        Ok(DVector::from_vec(l.fiber_derivative(x)?) - &p)
    };
    let goal = tol * (1.0 + p.norm());
    let mut g = resid(&x)?;
    let mut iterations = 0;
    while g.norm() > goal {
        if iterations >= max_iter {
            return Err(FieldError::NonConvergence { iterations, residual: g.norm() });
        }
        iterations += 1;
        let w = l.hessian(&x)?;
        let step = match w.clone().lu().solve(&g) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => linalg::min_norm_solve(&w, &g, RANK_RTOL).0,
        };
        if step.amax() == 0.0 {
            return Err(FieldError::NonConvergence { iterations, residual: g.norm() });
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = x.clone();
            for r in 0..nk {
                trial[k + n + r] -= lambda * step[r];
            }
            if let Ok(gt) = resid(&trial) {
                if gt.norm() <= g.norm() || gt.norm() <= goal {
                    x = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(FieldError::NonConvergence { iterations, residual: g.norm() });
        }
    }
    let w = l.hessian(&x)?;
    let r = linalg::rank(&w, RANK_RTOL);
    if r < nk {
        return Err(FieldError::SingularHessian { rank: r, expected: nk });
    }
    Ok(LegendreInverse {
        h_value: l.energy_at(&x)?,
        v: x[k + n..].to_vec(),
        iterations,
        residual: g.norm(),
    })
}

/// H = E_L o FL^{-1}, evaluated by Newton inversion at each call.
#[derive(Debug, Clone)]
pub struct LegendreHamiltonian {
    pub lagrangian: Lagrangian,
    pub tol: f64,
    pub max_iter: usize,
}

impl LegendreHamiltonian {
    pub fn new(lagrangian: Lagrangian) -> Self {
        LegendreHamiltonian { lagrangian, tol: NEWTON_TOL, max_iter: NEWTON_MAX_ITER }
    }
}

impl HamiltonianFunction for LegendreHamiltonian {
    fn chart(&self) -> ChartSpec {
        ChartSpec::hamiltonian(self.lagrangian.k, self.lagrangian.n)
    }

    /// On the graph dH/dp^A_i = v^i_A, dH/dq = -dL/dq and dH/dt = -dL/dt.
    fn gradient(&self, x: &[f64]) -> Result<HamGradient> {
        let chart = self.chart();
        check_dim(chart, x)?;
        let y = ChartPoint::new(chart, x.to_vec())?;
        let inv = hamiltonian_from_lagrangian(&self.lagrangian, &y, None, self.tol, self.max_iter)?;
        let (k, n) = (chart.k, chart.n);
        let mut lx = x[..k + n].to_vec();
        lx.extend(&inv.v);
        let d = self.lagrangian.derivs(&lx)?;
        let mut dp = vec![0.0; k * n];
        for a in 0..k {
            for i in 0..n {
                dp[a * n + i] = inv.v[i * k + a];
            }
        }
        Ok(HamGradient {
            value: inv.h_value,
            dt: d.dt.iter().map(|v| -v).collect(),
            dq: d.dq.iter().map(|v| -v).collect(),
            dp,
        })
    }
}

/// (X_A)^B = delta, (X_A)^i = dH/dp^A_i, (X_A)^B_i = -delta_A^B (1/k) dH/dq^i.
pub fn hdw_kvector(h: &dyn HamiltonianFunction, x: &[f64]) -> Result<KVector> {
    let chart = h.chart();
    if chart.kind != ChartKind::HamiltonianBundle {
        return Err(FieldError::Config("hdw_kvector needs a Hamiltonian-bundle chart".into()));
    }
    let g = h.gradient(x)?;
    let (k, n) = (chart.k, chart.n);
    let mut out = KVector::canonical_time(chart);
    for a in 0..k {
        for i in 0..n {
            out.set(a, chart.q(i), g.dp[a * n + i]);
            out.set(a, chart.p(a, i), -g.dq[i] / k as f64);
        }
    }
    Ok(out)
}

/// The de Donder-Weyl k-vector field of a Hamiltonian.
pub struct HdwField<'a> {
    pub h: &'a dyn HamiltonianFunction,
}

impl KVectorField for HdwField<'_> {
    fn chart(&self) -> ChartSpec {
        self.h.chart()
    }

    fn eval(&self, x: &[f64]) -> Result<KVector> {
        hdw_kvector(self.h, x)
    }
}

/// Largest violation of the three coefficient conditions for `x` at `point`.
pub fn hdw_condition_defect(h: &dyn HamiltonianFunction, point: &[f64], x: &KVector) -> Result<f64> {
    let c = h.chart();
    let g = h.gradient(point)?;
    let (k, n) = (c.k, c.n);
    let mut d = x.time_defect();
    for a in 0..k {
        for i in 0..n {
            d = d.max((x.get(a, c.q(i)) - g.dp[a * n + i]).abs());
        }
    }
    for i in 0..n {
        let tr: f64 = (0..k).map(|a| x.get(a, c.p(a, i))).sum();
        d = d.max((tr + g.dq[i]).abs());
    }
    Ok(d)
}

/// First jet of a map t -> (q, p).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonJet {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    /// p^A_i at `A*n + i`
    pub p: Vec<f64>,
    /// dq^i/dt^A at `i*k + A`
    pub dq: Vec<f64>,
    /// dp^A_i/dt^B at `(A*n + i)*k + B`
    pub dp: Vec<f64>,
}

impl HamiltonJet {
    pub fn zeros(k: usize, n: usize) -> HamiltonJet {
        HamiltonJet {
            t: vec![0.0; k],
            q: vec![0.0; n],
            p: vec![0.0; k * n],
            dq: vec![0.0; n * k],
            dp: vec![0.0; k * n * k],
        }
    }

    pub fn point(&self) -> Vec<f64> {
        let mut x = self.t.clone();
        x.extend(&self.q);
        x.extend(&self.p);
        x
    }
}

/// Residuals of the field equations along a jet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonResidual {
    /// dH/dp^A_i - dq^i/dt^A at `A*n + i`
    pub velocity: Vec<f64>,
    /// dH/dq^i + sum_A dp^A_i/dt^A
    pub momentum: Vec<f64>,
}

impl HamiltonResidual {
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.velocity).max(linalg::max_abs(&self.momentum))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.velocity.clone();
        v.extend(&self.momentum);
        v
    }
}

pub fn hamilton_residual_on_jet(h: &dyn HamiltonianFunction, jet: &HamiltonJet) -> Result<HamiltonResidual> {
    let c = h.chart();
    let (k, n) = (c.k, c.n);
    if jet.t.len() != k || jet.q.len() != n || jet.p.len() != k * n || jet.dq.len() != n * k || jet.dp.len() != k * n * k {
        return Err(FieldError::ShapeMismatch(format!("jet shapes do not match k={k}, n={n}")));
    }
    let g = h.gradient(&jet.point())?;
    let mut velocity = vec![0.0; k * n];
    for a in 0..k {
        for i in 0..n {
            velocity[a * n + i] = g.dp[a * n + i] - jet.dq[i * k + a];
        }
    }
    let momentum = (0..n)
        .map(|i| g.dq[i] + (0..k).map(|a| jet.dp[(a * n + i) * k + a]).sum::<f64>())
        .collect();
    Ok(HamiltonResidual { velocity, momentum })
}

/// First jet of a Hamiltonian-chart section at an interior node.
pub fn hamilton_jet(s: &FieldSection, node: &[usize]) -> Result<HamiltonJet> {
    let c = s.chart;
    if c.kind != ChartKind::HamiltonianBundle {
        return Err(FieldError::Config(format!("expected a Hamiltonian-bundle section, got {:?}", c.kind)));
    }
    let (k, n) = (c.k, c.n);
    let rec = second_jet(s, node)?;
    let mut jet = HamiltonJet::zeros(k, n);
    jet.t = s.grid.time_of(node);
    for i in 0..n {
        jet.q[i] = rec.values[c.q(i)];
        for a in 0..k {
            jet.dq[i * k + a] = rec.first(c.q(i), a);
        }
    }
    for a in 0..k {
        for i in 0..n {
            jet.p[a * n + i] = rec.values[c.p(a, i)];
            for b in 0..k {
                jet.dp[(a * n + i) * k + b] = rec.first(c.p(a, i), b);
            }
        }
    }
    Ok(jet)
}

pub fn hamilton_residual_on_section(
    h: &dyn HamiltonianFunction,
    s: &FieldSection,
) -> Result<Vec<(Vec<usize>, HamiltonResidual)>> {
    if s.chart != h.chart() {
        return Err(FieldError::DimensionMismatch("section and Hamiltonian live on different charts".into()));
    }
    s.grid.interior_nodes()
        .map(|node| {
            let r = hamilton_jet(s, &node)
                .and_then(|j| hamilton_residual_on_jet(h, &j))
                .map_err(|e| FieldError::AtNode { node: node.clone(), source: Box::new(e) })?;
            Ok((node, r))
        })
        .collect()
}

/// eta^A = dt^A.
pub fn canonical_eta(chart: ChartSpec, a: usize) -> DVector<f64> {
    forms::basis(chart.dim(), chart.t(a))
}

/// theta^A = p^A_i dq^i at `x`.
pub fn canonical_theta(chart: ChartSpec, x: &[f64], a: usize) -> DVector<f64> {
    let mut th = DVector::zeros(chart.dim());
    for i in 0..chart.n {
        th[chart.q(i)] = x[chart.p(a, i)];
    }
    th
}

/// omega^A = dq^i ^ dp^A_i.
pub fn canonical_omega(chart: ChartSpec, a: usize) -> DMatrix<f64> {
    let d = chart.dim();
    let mut w = DMatrix::zeros(d, d);
    for i in 0..chart.n {
        w += forms::wedge(&forms::basis(d, chart.q(i)), &forms::basis(d, chart.p(a, i)));
    }
    w
}

/// Reeb fields of the canonical structure, with the defining-equation residual.
pub fn canonical_reeb(chart: ChartSpec) -> Result<(Vec<DVector<f64>>, f64)> {
    let etas: Vec<_> = (0..chart.k).map(|a| canonical_eta(chart, a)).collect();
    let omegas: Vec<_> = (0..chart.k).map(|a| canonical_omega(chart, a)).collect();
    forms::reeb_fields(&etas, &omegas)
}

#[cfg(test)]
mod tests;
