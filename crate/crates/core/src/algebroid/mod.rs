//! Field theory on a Lie algebroid E -> Q: Lagrangian side on R^k x (+^k E),
//! Hamiltonian side on R^k x (+^k E^*).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{FieldError, Result};
use crate::expr::{Compiled, CoordRole, ScalarField};
use crate::hamiltonian::{HamiltonianFunction, ExprHamiltonian};
use crate::kvector::{solve_trace_system, KVector, KVectorField, SolveOptions};
use crate::linalg;
use crate::models::{AlgebroidValues, ChartKind, ChartSpec, LieAlgebroidData};

/// A Lagrangian on the algebroid velocity chart with its derivatives compiled.
#[derive(Debug, Clone)]
pub struct AlgebroidLagrangian {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    chart: ChartSpec,
    field: ScalarField,
    value: Compiled,
    dt: Vec<Compiled>,
    dq: Vec<Compiled>,
    dy: Vec<Compiled>,
    ty: Vec<Compiled>,
    qy: Vec<Compiled>,
    yy: Vec<Compiled>,
}

/// Derivatives at a point; fiber slots indexed `alpha*k + A`.
#[derive(Debug, Clone)]
pub struct AlgebroidDerivs {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub value: f64,
    pub dt: Vec<f64>,
    pub dq: Vec<f64>,
    pub dy: Vec<f64>,
    /// d2L/dt^B dy^alpha_A at `(alpha*k + A)*k + B`
    pub ty: Vec<f64>,
    /// d2L/dq^i dy^alpha_A at `(alpha*k + A)*n + i`
    pub qy: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

impl AlgebroidDerivs {
    pub fn dy(&self, alpha: usize, a: usize) -> f64 {
        self.dy[alpha * self.k + a]
    }

    pub fn ty(&self, alpha: usize, a: usize, b: usize) -> f64 {
        self.ty[(alpha * self.k + a) * self.k + b]
    }

    pub fn qy(&self, alpha: usize, a: usize, i: usize) -> f64 {
        self.qy[(alpha * self.k + a) * self.n + i]
    }
}

impl AlgebroidLagrangian {
    pub fn new(field: ScalarField, k: usize, n: usize, m: usize) -> Result<Self> {
        let chart = ChartSpec::new(ChartKind::AlgebroidVel, k, n, m)?;
        if let Some(s) = field.free_symbols().iter().find(|s| chart.index_of_name(s).is_none()) {
            return Err(FieldError::IllegalCoordinate {
                name: s.clone(),
                context: format!("an algebroid Lagrangian with k={k}, n={n}, m={m}"),
            });
        }
        let names = chart.names();
        let c = |f: &ScalarField| f.compile(&names);
        let tn: Vec<String> = (0..k).map(|a| CoordRole::Time { a }.name()).collect();
        let qn: Vec<String> = (0..n).map(|i| CoordRole::Base { i }.name()).collect();
        let yn: Vec<String> = (0..m)
            .flat_map(|alpha| (0..k).map(move |a| CoordRole::AlgVelocity { alpha, a }.name()))
            .collect();
        let dyf: Vec<ScalarField> = yn.iter().map(|y| field.diff(y)).collect();
        let mut ty = Vec::new();
        let mut qy = Vec::new();
        let mut yy = Vec::new();
        for g in &dyf {
            for t in &tn {
                ty.push(c(&g.diff(t))?);
            }
            for q in &qn {
                qy.push(c(&g.diff(q))?);
            }
            for y in &yn {
                yy.push(c(&g.diff(y))?);
            }
        }
        Ok(AlgebroidLagrangian {
            k,
            n,
            m,
            chart,
            value: c(&field)?,
            dt: tn.iter().map(|t| c(&field.diff(t))).collect::<Result<_>>()?,
            dq: qn.iter().map(|q| c(&field.diff(q))).collect::<Result<_>>()?,
            dy: dyf.iter().map(c).collect::<Result<_>>()?,
            field,
            ty,
            qy,
            yy,
        })
    }

    pub fn chart(&self) -> ChartSpec {
        self.chart
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn derivs(&self, x: &[f64]) -> Result<AlgebroidDerivs> {
        if x.len() != self.chart.dim() {
            return Err(FieldError::DimensionMismatch(format!(
                "algebroid velocity chart has dimension {}, got {}",
                self.chart.dim(),
                x.len()
            )));
        }
        let ev = |v: &[Compiled]| v.iter().map(|f| f.eval(x)).collect::<Result<Vec<f64>>>();
        let mk = self.m * self.k;
        let yy = ev(&self.yy)?;
        Ok(AlgebroidDerivs {
            k: self.k,
            n: self.n,
            m: self.m,
            value: self.value.eval(x)?,
            dt: ev(&self.dt)?,
            dq: ev(&self.dq)?,
            dy: ev(&self.dy)?,
            ty: ev(&self.ty)?,
            qy: ev(&self.qy)?,
            hessian: DMatrix::from_fn(mk, mk, |r, s| yy[r * mk + s]),
        })
    }
}

fn check_alg(alg: &LieAlgebroidData, n: usize, m: usize) -> Result<()> {
    if alg.n != n || alg.m != m {
        return Err(FieldError::DimensionMismatch(format!(
            "algebroid has n={}, m={}, model expects n={n}, m={m}",
            alg.n, alg.m
        )));
    }
    Ok(())
}

/// Poincare-Cartan coefficients on the algebroid prolongation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebroidCartan {
    pub k: usize,
    pub m: usize,
    /// `theta[A][alpha]` = dL/dy^alpha_A
    pub theta: Vec<Vec<f64>>,
    pub energy: f64,
    /// `time_block[A][alpha][B]` = d2L/dt^B dy^alpha_A
    pub time_block: Vec<Vec<Vec<f64>>>,
    /// `xx_block[A]`: antisymmetric m x m coefficient matrix of the X^alpha ^ X^beta part
    pub xx_block: Vec<Vec<Vec<f64>>>,
    /// `hessian[alpha*k + A][beta*k + B]` = d2L/dy^beta_B dy^alpha_A
    pub hessian: Vec<Vec<f64>>,
}

impl AlgebroidCartan {
    /// Omega_L^A as a matrix on the basis (Y_B, X_alpha, V^beta_B), ordered
    /// like the velocity chart.
    pub fn omega_matrix(&self, a: usize) -> DMatrix<f64> {
        let (k, m) = (self.k, self.m);
        let d = k + m + m * k;
        let x = |alpha: usize| k + alpha;
        let v = |beta: usize, b: usize| k + m + beta * k + b;
        let mut w = DMatrix::zeros(d, d);
        for alpha in 0..m {
            for b in 0..k {
                // X^alpha ^ Y^B
                let c = self.time_block[a][alpha][b];
                w[(x(alpha), b)] += c;
                w[(b, x(alpha))] -= c;
            }
            for beta in 0..m {
                w[(x(alpha), x(beta))] += self.xx_block[a][alpha][beta];
                for b in 0..k {
                    let c = self.hessian[alpha * k + a][beta * k + b];
                    w[(x(alpha), v(beta, b))] += c;
                    w[(v(beta, b), x(alpha))] -= c;
                }
            }
        }
        w
    }
}

pub fn algebroid_cartan(l: &AlgebroidLagrangian, alg: &LieAlgebroidData, x: &[f64]) -> Result<AlgebroidCartan> {
    check_alg(alg, l.n, l.m)?;
    let d = l.derivs(x)?;
    let (k, n, m) = (l.k, l.n, l.m);
    let s = alg.eval(&x[k..k + n])?;
    let c = l.chart();
    let mut energy = -d.value;
    for alpha in 0..m {
        for a in 0..k {
            energy += x[c.y(alpha, a)] * d.dy(alpha, a);
        }
    }
    let xx_block = (0..k)
        .map(|a| {
            (0..m)
                .map(|al| {
                    (0..m)
                        .map(|be| {
                            let mut v = 0.0;
                            for i in 0..n {
                                v += s.rho(be, i) * d.qy(al, a, i) - s.rho(al, i) * d.qy(be, a, i);
                            }
                            for g in 0..m {
                                v += s.c(g, al, be) * d.dy(g, a);
                            }
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(AlgebroidCartan {
        k,
        m,
        theta: (0..k).map(|a| (0..m).map(|al| d.dy(al, a)).collect()).collect(),
        energy,
        time_block: (0..k)
            .map(|a| (0..m).map(|al| (0..k).map(|b| d.ty(al, a, b)).collect()).collect())
            .collect(),
        xx_block,
        hessian: (0..m * k).map(|r| (0..m * k).map(|s| d.hessian[(r, s)]).collect()).collect(),
    })
}

/// Coefficients of the Lagrangian section: xi^alpha_A = y^alpha_A and the
/// fiber block `fiber[(A*m + beta)*k + B]` = (xi_A)^beta_B.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebroidSection {
    pub k: usize,
    pub m: usize,
    pub xi: Vec<f64>,
    pub fiber: Vec<f64>,
}

impl AlgebroidSection {
    pub fn fiber(&self, a: usize, beta: usize, b: usize) -> f64 {
        self.fiber[(a * self.m + beta) * self.k + b]
    }
}

fn el_rhs(d: &AlgebroidDerivs, s: &AlgebroidValues, x: &[f64], c: ChartSpec) -> Vec<f64> {
    let (k, n, m) = (d.k, d.n, d.m);
    (0..m)
        .map(|al| {
            let mut r = 0.0;
            for i in 0..n {
                r += s.rho(al, i) * d.dq[i];
            }
            for a in 0..k {
                for be in 0..m {
                    for g in 0..m {
                        r -= s.c(g, al, be) * x[c.y(be, a)] * d.dy(g, a);
                    }
                }
                r -= d.ty(al, a, a);
                for i in 0..n {
                    let dq: f64 = (0..m).map(|g| s.rho(g, i) * x[c.y(g, a)]).sum();
                    r -= d.qy(al, a, i) * dq;
                }
            }
            r
        })
        .collect()
}

/// Solves the algebroid Euler-Lagrange system for the fiber coefficients.
pub fn el_algebroid_section(
    l: &AlgebroidLagrangian,
    alg: &LieAlgebroidData,
    x: &[f64],
    opts: &SolveOptions,
) -> Result<AlgebroidSection> {
    check_alg(alg, l.n, l.m)?;
    let d = l.derivs(x)?;
    let s = alg.eval(&x[l.k..l.k + l.n])?;
    let rhs = el_rhs(&d, &s, x, l.chart());
    let fiber = solve_trace_system(&d.hessian, &rhs, l.k, opts)?;
    let c = l.chart();
    let mut xi = vec![0.0; l.m * l.k];
    for al in 0..l.m {
        for a in 0..l.k {
            xi[al * l.k + a] = x[c.y(al, a)];
        }
    }
    Ok(AlgebroidSection { k: l.k, m: l.m, xi, fiber })
}

/// Left minus right side of the fiber system for given coefficients.
pub fn el_algebroid_section_residual(
    l: &AlgebroidLagrangian,
    alg: &LieAlgebroidData,
    x: &[f64],
    sec: &AlgebroidSection,
) -> Result<Vec<f64>> {
    let d = l.derivs(x)?;
    let s = alg.eval(&x[l.k..l.k + l.n])?;
    let rhs = el_rhs(&d, &s, x, l.chart());
    let (k, m) = (l.k, l.m);
    Ok((0..m)
        .map(|al| {
            let mut v = 0.0;
            for a in 0..k {
                for be in 0..m {
                    for b in 0..k {
                        v += d.hessian[(be * k + b, al * k + a)] * sec.fiber(a, be, b);
                    }
                }
            }
            v - rhs[al]
        })
        .collect())
}

/// k-vector field on the velocity chart whose integral sections solve the
/// algebroid Euler-Lagrange equations (when they exist).
pub struct AlgebroidElField<'a> {
    pub lagrangian: &'a AlgebroidLagrangian,
    pub algebroid: &'a LieAlgebroidData,
    pub symmetric: bool,
}

impl KVectorField for AlgebroidElField<'_> {
    fn chart(&self) -> ChartSpec {
        self.lagrangian.chart()
    }

    fn eval(&self, x: &[f64]) -> Result<KVector> {
        let l = self.lagrangian;
        let opts = SolveOptions { symmetric: self.symmetric, reference: None };
        let sec = el_algebroid_section(l, self.algebroid, x, &opts)?;
        let s = self.algebroid.eval(&x[l.k..l.k + l.n])?;
        let c = l.chart();
        let mut out = KVector::canonical_time(c);
        for a in 0..l.k {
            for i in 0..l.n {
                let v: f64 = (0..l.m).map(|al| s.rho(al, i) * x[c.y(al, a)]).sum();
                out.set(a, c.q(i), v);
            }
            for be in 0..l.m {
                for b in 0..l.k {
                    out.set(a, c.y(be, b), sec.fiber(a, be, b));
                }
            }
        }
        Ok(out)
    }
}

/// A map t -> (t, q, y) with first derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangianAlgebroidJet {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    /// phi^alpha_A at `alpha*k + A`
    pub y: Vec<f64>,
    /// d phi^B / dt^A at `A*k + B`
    pub dtime: Vec<f64>,
    /// d phi^i / dt^A at `i*k + A`
    pub dq: Vec<f64>,
    /// d phi^alpha_A / dt^B at `(alpha*k + A)*k + B`
    pub dy: Vec<f64>,
}

impl LagrangianAlgebroidJet {
    pub fn zeros(k: usize, n: usize, m: usize) -> Self {
        LagrangianAlgebroidJet {
            t: vec![0.0; k],
            q: vec![0.0; n],
            y: vec![0.0; m * k],
            dtime: vec![0.0; k * k],
            dq: vec![0.0; n * k],
            dy: vec![0.0; m * k * k],
        }
    }

    pub fn point(&self) -> Vec<f64> {
        let mut x = self.t.clone();
        x.extend(&self.q);
        x.extend(&self.y);
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebroidElResidual {
    /// d phi^B/dt^A - delta, `A*k + B`
    pub time: Vec<f64>,
    /// d phi^i/dt^A - rho^i_alpha phi^alpha_A, `i*k + A`
    pub anchor: Vec<f64>,
    /// d phi^alpha_A/dt^B - d phi^alpha_B/dt^A + C^alpha_{beta gamma} phi^beta_B phi^gamma_A, `(alpha*k + A)*k + B`
    pub curvature: Vec<f64>,
    /// Euler-Lagrange part, one per alpha.
    pub euler_lagrange: Vec<f64>,
}

impl AlgebroidElResidual {
    pub fn groups(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("time", &self.time),
            ("anchor", &self.anchor),
            ("curvature", &self.curvature),
            ("el", &self.euler_lagrange),
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.groups().iter().map(|(_, v)| linalg::max_abs(v)).fold(0.0, f64::max)
    }
}

fn time_group(k: usize, dtime: &[f64]) -> Vec<f64> {
    (0..k * k).map(|r| dtime[r] - if r / k == r % k { 1.0 } else { 0.0 }).collect()
}

fn curvature_group(k: usize, m: usize, s: &AlgebroidValues, y: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m * k * k];
    for al in 0..m {
        for a in 0..k {
            for b in 0..k {
                let mut v = dy[(al * k + a) * k + b] - dy[(al * k + b) * k + a];
                for be in 0..m {
                    for g in 0..m {
                        v += s.c(al, be, g) * y[be * k + b] * y[g * k + a];
                    }
                }
                out[(al * k + a) * k + b] = v;
            }
        }
    }
    out
}

fn anchor_group(k: usize, n: usize, m: usize, s: &AlgebroidValues, y: &[f64], dq: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        for a in 0..k {
            out[i * k + a] = dq[i * k + a] - (0..m).map(|al| s.rho(al, i) * y[al * k + a]).sum::<f64>();
        }
    }
    out
}

pub fn el_algebroid_residual(
    l: &AlgebroidLagrangian,
    alg: &LieAlgebroidData,
    jet: &LagrangianAlgebroidJet,
) -> Result<AlgebroidElResidual> {
    check_alg(alg, l.n, l.m)?;
    let (k, n, m) = (l.k, l.n, l.m);
    if jet.t.len() != k
        || jet.q.len() != n
        || jet.y.len() != m * k
        || jet.dtime.len() != k * k
        || jet.dq.len() != n * k
        || jet.dy.len() != m * k * k
    {
        return Err(FieldError::ShapeMismatch(format!("jet shapes do not match k={k}, n={n}, m={m}")));
    }
    let x = jet.point();
    let d = l.derivs(&x)?;
    let s = alg.eval(&jet.q)?;
    let euler_lagrange = (0..m)
        .map(|al| {
            let mut v = 0.0;
            for a in 0..k {
                v += d.ty(al, a, a);
                for i in 0..n {
                    v += d.qy(al, a, i) * jet.dq[i * k + a];
                }
                for be in 0..m {
                    for b in 0..k {
                        v += d.hessian[(al * k + a, be * k + b)] * jet.dy[(be * k + b) * k + a];
                    }
                }
                for be in 0..m {
                    for g in 0..m {
                        v += jet.y[be * k + a] * s.c(g, al, be) * d.dy(g, a);
                    }
                }
            }
            for i in 0..n {
                v -= s.rho(al, i) * d.dq[i];
            }
            v
        })
        .collect();
    Ok(AlgebroidElResidual {
        time: time_group(k, &jet.dtime),
        anchor: anchor_group(k, n, m, &s, &jet.y, &jet.dq),
        curvature: curvature_group(k, m, &s, &jet.y, &jet.dy),
        euler_lagrange,
    })
}

fn require_mom(h: &dyn HamiltonianFunction, alg: &LieAlgebroidData) -> Result<ChartSpec> {
    let c = h.chart();
    if c.kind != ChartKind::AlgebroidMom {
        return Err(FieldError::Config("algebroid Hamiltonian needs an algebroid momentum chart".into()));
    }
    check_alg(alg, c.n, c.m)?;
    Ok(c)
}

/// Hamiltonian section coefficients: xi^C_B = delta, xi^alpha_B = dH/dw^B_alpha,
/// (xi_A)^A_beta = C^gamma_{alpha beta} w^A_gamma xi^alpha_A - (1/k) rho^i_beta dH/dq^i,
/// off-diagonal (xi_A)^B_beta = 0. Returned as a k-vector on the momentum chart
/// with dq components rho^i_alpha xi^alpha_A.
pub fn hamilton_algebroid_kvector(h: &dyn HamiltonianFunction, alg: &LieAlgebroidData, x: &[f64]) -> Result<KVector> {
    let c = require_mom(h, alg)?;
    let (k, n, m) = (c.k, c.n, c.m);
    let g = h.gradient(x)?;
    let s = alg.eval(&x[k..k + n])?;
    let mut out = KVector::canonical_time(c);
    for a in 0..k {
        for i in 0..n {
            let v: f64 = (0..m).map(|al| s.rho(al, i) * g.dp[a * m + al]).sum();
            out.set(a, c.q(i), v);
        }
        for be in 0..m {
            let mut v = 0.0;
            for al in 0..m {
                for ga in 0..m {
                    v += s.c(ga, al, be) * x[c.w(a, ga)] * g.dp[a * m + al];
                }
            }
            for i in 0..n {
                v -= s.rho(be, i) * g.dq[i] / k as f64;
            }
            out.set(a, c.w(a, be), v);
        }
    }
    Ok(out)
}

/// The ordinary velocity part xi^alpha_A = dH/dw^A_alpha, indexed `alpha*k + A`.
pub fn hamilton_algebroid_velocities(h: &dyn HamiltonianFunction, x: &[f64]) -> Result<Vec<f64>> {
    let c = h.chart();
    let g = h.gradient(x)?;
    let (k, m) = (c.k, c.m);
    let mut xi = vec![0.0; m * k];
    for a in 0..k {
        for al in 0..m {
            xi[al * k + a] = g.dp[a * m + al];
        }
    }
    Ok(xi)
}

pub struct AlgebroidHamiltonField<'a> {
    pub h: &'a dyn HamiltonianFunction,
    pub algebroid: &'a LieAlgebroidData,
}

impl KVectorField for AlgebroidHamiltonField<'_> {
    fn chart(&self) -> ChartSpec {
        self.h.chart()
    }

    fn eval(&self, x: &[f64]) -> Result<KVector> {
        hamilton_algebroid_kvector(self.h, self.algebroid, x)
    }
}

/// A map t -> (t, q, w, psi^alpha_A) with first derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonAlgebroidJet {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    /// psi^A_alpha at `A*m + alpha`
    pub w: Vec<f64>,
    /// psi^alpha_A at `alpha*k + A`
    pub vel: Vec<f64>,
    /// d psi^B/dt^A at `A*k + B`
    pub dtime: Vec<f64>,
    /// d psi^i/dt^A at `i*k + A`
    pub dq: Vec<f64>,
    /// d psi^A_alpha/dt^B at `(A*m + alpha)*k + B`
    pub dw: Vec<f64>,
    /// d psi^alpha_A/dt^B at `(alpha*k + A)*k + B`
    pub dvel: Vec<f64>,
}

impl HamiltonAlgebroidJet {
    pub fn zeros(k: usize, n: usize, m: usize) -> Self {
        HamiltonAlgebroidJet {
            t: vec![0.0; k],
            q: vec![0.0; n],
            w: vec![0.0; k * m],
            vel: vec![0.0; m * k],
            dtime: vec![0.0; k * k],
            dq: vec![0.0; n * k],
            dw: vec![0.0; k * m * k],
            dvel: vec![0.0; m * k * k],
        }
    }

    pub fn point(&self) -> Vec<f64> {
        let mut x = self.t.clone();
        x.extend(&self.q);
        x.extend(&self.w);
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebroidHamiltonResidual {
    pub time: Vec<f64>,
    /// rho^i_alpha dH/dw^A_alpha - d psi^i/dt^A, `A*n + i`
    pub hamilton_q: Vec<f64>,
    /// sum_A d psi^A_beta/dt^A + rho^i_beta dH/dq^i - sum_A C^gamma_{alpha beta} psi^A_gamma dH/dw^A_alpha
    pub hamilton_p: Vec<f64>,
    /// d psi^i/dt^A - rho^i_alpha psi^alpha_A, `i*k + A`
    pub anchor: Vec<f64>,
    /// psi^alpha_A - dH/dw^A_alpha, `alpha*k + A`
    pub momentum: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl AlgebroidHamiltonResidual {
    pub fn groups(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("time", &self.time),
            ("hamilton_q", &self.hamilton_q),
            ("hamilton_p", &self.hamilton_p),
            ("anchor", &self.anchor),
            ("momentum", &self.momentum),
            ("curvature", &self.curvature),
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.groups().iter().map(|(_, v)| linalg::max_abs(v)).fold(0.0, f64::max)
    }
}

pub fn hamilton_algebroid_residual(
    h: &dyn HamiltonianFunction,
    alg: &LieAlgebroidData,
    jet: &HamiltonAlgebroidJet,
) -> Result<AlgebroidHamiltonResidual> {
    let c = require_mom(h, alg)?;
    let (k, n, m) = (c.k, c.n, c.m);
    if jet.t.len() != k
        || jet.q.len() != n
        || jet.w.len() != k * m
        || jet.vel.len() != m * k
        || jet.dtime.len() != k * k
        || jet.dq.len() != n * k
        || jet.dw.len() != k * m * k
        || jet.dvel.len() != m * k * k
    {
        return Err(FieldError::ShapeMismatch(format!("jet shapes do not match k={k}, n={n}, m={m}")));
    }
    let g = h.gradient(&jet.point())?;
    let s = alg.eval(&jet.q)?;
    let mut hamilton_q = vec![0.0; k * n];
    for a in 0..k {
        for i in 0..n {
            let v: f64 = (0..m).map(|al| s.rho(al, i) * g.dp[a * m + al]).sum();
            hamilton_q[a * n + i] = v - jet.dq[i * k + a];
        }
    }
    let hamilton_p = (0..m)
        .map(|be| {
            let mut v: f64 = (0..k).map(|a| jet.dw[(a * m + be) * k + a]).sum();
            for i in 0..n {
                v += s.rho(be, i) * g.dq[i];
            }
            for a in 0..k {
                for al in 0..m {
                    for ga in 0..m {
                        v -= s.c(ga, al, be) * jet.w[a * m + ga] * g.dp[a * m + al];
                    }
                }
            }
            v
        })
        .collect();
    let mut momentum = vec![0.0; m * k];
    for al in 0..m {
        for a in 0..k {
            momentum[al * k + a] = jet.vel[al * k + a] - g.dp[a * m + al];
        }
    }
    Ok(AlgebroidHamiltonResidual {
        time: time_group(k, &jet.dtime),
        hamilton_q,
        hamilton_p,
        anchor: anchor_group(k, n, m, &s, &jet.vel, &jet.dq),
        momentum,
        curvature: curvature_group(k, m, &s, &jet.vel, &jet.dvel),
    })
}

/// Renaming v{i}_{A} -> y{i}_{A} turning a standard Lagrangian into one on E = TQ.
pub fn velocity_renaming(k: usize, n: usize) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for i in 0..n {
        for a in 0..k {
            map.insert(CoordRole::Velocity { i, a }.name(), CoordRole::AlgVelocity { alpha: i, a }.name());
        }
    }
    map
}

/// Renaming p{A}_{i} -> w{A}_{i}.
pub fn momentum_renaming(k: usize, n: usize) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for a in 0..k {
        for i in 0..n {
            map.insert(CoordRole::Momentum { a, i }.name(), CoordRole::AlgMomentum { a, alpha: i }.name());
        }
    }
    map
}

/// Discrepancies between the algebroid and standard formalisms for E = TQ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub points: usize,
    pub coefficient_discrepancy: f64,
    pub residual_discrepancy: f64,
}

impl ReductionReport {
    pub fn max(&self) -> f64 {
        self.coefficient_discrepancy.max(self.residual_discrepancy)
    }
}

fn require_standard(alg: &LieAlgebroidData) -> Result<()> {
    if !alg.is_standard() {
        return Err(FieldError::Config("reduction needs rho = identity and C = 0".into()));
    }
    Ok(())
}

fn diff_max(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compares both Lagrangian formalisms at the given points of the Lagrangian
/// chart. Each point also carries an acceleration array used for residuals.
pub fn reduce_standard_lagrangian(
    field: &ScalarField,
    k: usize,
    n: usize,
    points: &[(Vec<f64>, Vec<f64>)],
) -> Result<ReductionReport> {
    use crate::lagrangian::{Lagrangian, SecondJet};
    let alg = LieAlgebroidData::tangent_bundle(n);
    require_standard(&alg)?;
    let std = Lagrangian::new(field.clone(), k, n)?;
    let al = AlgebroidLagrangian::new(field.rename(&velocity_renaming(k, n)), k, n, n)?;
    let lc = std.chart();
    let mut coeff = 0.0f64;
    let mut res = 0.0f64;
    for (x, acc) in points {
        let xp = crate::models::ChartPoint::new(lc, x.clone())?;
        let cd = std.cartan_data(&xp)?;
        let ac = algebroid_cartan(&al, &alg, x)?;
        for a in 0..k {
            coeff = coeff.max(diff_max(&cd.theta[a], &ac.theta[a]));
            coeff = coeff.max((cd.omega_form(a) - ac.omega_matrix(a)).amax());
        }
        coeff = coeff.max((std.energy_at(x)? - ac.energy).abs());
        let opts = SolveOptions::default();
        let s1 = std.sopde_solve_at(x, &opts)?;
        let s2 = el_algebroid_section(&al, &alg, x, &opts)?;
        coeff = coeff.max(diff_max(&s1.x, &s2.fiber));

        let mut jet = SecondJet::zeros(k, n);
        jet.t = x[..k].to_vec();
        jet.q = x[k..k + n].to_vec();
        jet.v = x[k + n..].to_vec();
        jet.a = acc.clone();
        let r1 = std.el_residual_on_jet(&jet)?;
        let mut aj = LagrangianAlgebroidJet::zeros(k, n, n);
        aj.t = jet.t.clone();
        aj.q = jet.q.clone();
        aj.y = jet.v.clone();
        for a in 0..k {
            aj.dtime[a * k + a] = 1.0;
        }
        aj.dq = jet.v.clone();
        aj.dy = acc.clone();
        let r2 = el_algebroid_residual(&al, &alg, &aj)?;
        res = res.max(diff_max(&r1, &r2.euler_lagrange));
        // The remaining groups reduce to the mixed-partial symmetry defect of the jet.
        let mut sym = vec![0.0; n * k * k];
        for i in 0..n {
            for a in 0..k {
                for b in 0..k {
                    sym[(i * k + a) * k + b] = acc[(i * k + a) * k + b] - acc[(i * k + b) * k + a];
                }
            }
        }
        res = res.max(diff_max(&sym, &r2.curvature));
        res = res.max(linalg::max_abs(&r2.time)).max(linalg::max_abs(&r2.anchor));
    }
    Ok(ReductionReport { points: points.len(), coefficient_discrepancy: coeff, residual_discrepancy: res })
}

/// Compares both Hamiltonian formalisms at points of the Hamiltonian chart,
/// each with a first jet `(dq, dp)` for the residuals.
pub fn reduce_standard_hamiltonian(
    field: &ScalarField,
    k: usize,
    n: usize,
    points: &[(Vec<f64>, Vec<f64>, Vec<f64>)],
) -> Result<ReductionReport> {
    use crate::hamiltonian::{hamilton_residual_on_jet, hdw_kvector, HamiltonJet};
    let alg = LieAlgebroidData::tangent_bundle(n);
    require_standard(&alg)?;
    let hc = ChartSpec::hamiltonian(k, n);
    let std = ExprHamiltonian::new(field.clone(), hc)?;
    let ac = ChartSpec::algebroid_mom(k, n, n);
    let alh = ExprHamiltonian::new(field.rename(&momentum_renaming(k, n)), ac)?;
    let mut coeff = 0.0f64;
    let mut res = 0.0f64;
    for (x, dq, dp) in points {
        let k1 = hdw_kvector(&std, x)?;
        let k2 = hamilton_algebroid_kvector(&alh, &alg, x)?;
        coeff = coeff.max(diff_max(&k1.components, &k2.components));

        let jet = HamiltonJet {
            t: x[..k].to_vec(),
            q: x[k..k + n].to_vec(),
            p: x[k + n..].to_vec(),
            dq: dq.clone(),
            dp: dp.clone(),
        };
        let r1 = hamilton_residual_on_jet(&std, &jet)?;
        let mut aj = HamiltonAlgebroidJet::zeros(k, n, n);
        aj.t = jet.t.clone();
        aj.q = jet.q.clone();
        aj.w = jet.p.clone();
        for a in 0..k {
            aj.dtime[a * k + a] = 1.0;
        }
        aj.dq = dq.clone();
        aj.dw = dp.clone();
        aj.vel = hamilton_algebroid_velocities(&alh, x)?;
        let r2 = hamilton_algebroid_residual(&alh, &alg, &aj)?;
        res = res.max(diff_max(&r1.velocity, &r2.hamilton_q));
        res = res.max(diff_max(&r1.momentum, &r2.hamilton_p));
    }
    Ok(ReductionReport { points: points.len(), coefficient_discrepancy: coeff, residual_discrepancy: res })
}
