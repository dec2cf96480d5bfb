use std::fmt::Write as _;

use super::report::{CheckResult, Table};
use super::{initial_on, resolve_grid, CommonOpts};
use crate::algebroid::{
    algebroid_cartan, el_algebroid_residual, hamilton_algebroid_residual, hamilton_algebroid_velocities,
    AlgebroidElField, AlgebroidHamiltonField, AlgebroidLagrangian, HamiltonAlgebroidJet, LagrangianAlgebroidJet,
};
use crate::diagnostics::{gradient_defect, pullback_defect, random_points};
use crate::error::{FieldError, Result};
use crate::expr::{CoordRole, ScalarField};
use crate::hamiltonian::{canonical_reeb, hamilton_residual_on_section, hdw_condition_defect, hdw_kvector, ExprHamiltonian, HdwField};
use crate::integrator::{integrate_kvector, second_jet};
use crate::lagrangian::{lagrangian_jet, Lagrangian, SopdeField};
use crate::models::{validate_algebroid, ChartPoint, ChartSpec, FieldSection, LieAlgebroidData, ModelKind, ModelSpec};
use crate::skinner_rusk::{constraint_algorithm, graph_point, ml_residual, project_solution, ConstraintReport, SrField};
use crate::tolerances;

pub(crate) type CmdResult = Result<(Vec<CheckResult>, Option<String>)>;

pub(crate) const SAMPLE_SEED: u64 = 0x5eed;
const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;

pub(crate) fn lagrangian_of(spec: &ModelSpec) -> Result<Lagrangian> {
    match spec.kind {
        ModelKind::Lagrangian | ModelKind::SkinnerRusk => {
            Lagrangian::new(spec.lagrangian()?.clone(), spec.chart.k, spec.chart.n)
        }
        other => Err(FieldError::Config(format!("{} models have no standard Lagrangian", other.as_str()))),
    }
}

pub(crate) fn hamiltonian_of(spec: &ModelSpec) -> Result<ExprHamiltonian> {
    match spec.kind {
        ModelKind::Hamiltonian | ModelKind::AlgebroidHamiltonian => {
            ExprHamiltonian::new(spec.hamiltonian()?.clone(), spec.chart)
        }
        other => Err(FieldError::Config(format!("{} models have no Hamiltonian", other.as_str()))),
    }
}

pub(crate) fn algebroid_lagrangian_of(spec: &ModelSpec) -> Result<AlgebroidLagrangian> {
    let c = spec.chart;
    AlgebroidLagrangian::new(spec.lagrangian()?.clone(), c.k, c.n, c.m)
}

pub(crate) fn sopde_field<'a>(spec: &ModelSpec, l: &'a Lagrangian) -> Result<SopdeField<'a>> {
    let f = SopdeField::new(l);
    match &spec.gauge {
        Some(g) => f.with_reference(g),
        None => Ok(f),
    }
}

/// Sample points for pointwise checks: the initial point (if any) then
/// reproducible random points in [-1, 1].
pub(crate) fn samples(spec: &ModelSpec, chart: ChartSpec, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count + 1);
    if let Ok(x) = spec.initial_point_on(chart) {
        out.push(x.values);
    }
    out.extend(random_points(chart.dim(), count, SAMPLE_SEED, 1.0));
    out
}

fn max_over(points: &[Vec<f64>], f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    points.iter().try_fold(0.0f64, |m, x| Ok(m.max(f(x)?)))
}

pub(crate) fn gradient_check(name: &str, f: &ScalarField, chart: ChartSpec, points: &[Vec<f64>], opts: &CommonOpts) -> CheckResult {
    let names = chart.names();
    let r = max_over(points, |x| gradient_defect(f, &names, x, FD_STEP, true));
    CheckResult::from_result(name, opts.tol_or(FD_TOL), r, &format!("{} points", points.len()))
}

pub(crate) fn structure_checks(alg: &LieAlgebroidData, opts: &CommonOpts, count: usize) -> Vec<CheckResult> {
    let pts = random_points(alg.n, count, SAMPLE_SEED, 1.0);
    let tol = opts.tol_or(tolerances::ALGEBROID_TOL);
    let r = validate_algebroid(alg, &pts, tol);
    vec![
        CheckResult::new("antisymmetry", r.antisymmetry_defect, tol, ""),
        CheckResult::new("jacobi", r.jacobi_defect, tol, ""),
        CheckResult::new("anchor", r.anchor_defect, tol, ""),
    ]
}

pub(crate) fn check(spec: &ModelSpec, opts: &CommonOpts) -> CmdResult {
    let mut checks = Vec::new();
    match spec.kind {
        ModelKind::Lagrangian | ModelKind::SkinnerRusk => {
            let l = lagrangian_of(spec)?;
            let lc = l.chart();
            let pts = samples(spec, lc, 20);
            let nk = l.n * l.k;
            let x0 = ChartPoint::new(lc, pts[0].clone())?;
            let reg = l.is_regular(&x0, tolerances::RANK_RTOL)?;
            checks.push(CheckResult::new(
                "regular",
                (nk - reg.rank) as f64,
                0.0,
                format!("rank {} of {nk}", reg.rank),
            ));
            checks.push(CheckResult::from_result(
                "pullback",
                opts.tol_or(1e-12),
                max_over(&pts, |x| pullback_defect(&l, x)),
                "",
            ));
            checks.push(gradient_check("gradients", l.field(), lc, &pts, opts));
        }
        ModelKind::Hamiltonian => {
            let h = hamiltonian_of(spec)?;
            let pts = samples(spec, spec.chart, 20);
            let hdw = max_over(&pts, |x| hdw_condition_defect(&h, x, &hdw_kvector(&h, x)?));
            checks.push(CheckResult::from_result("hdw_conditions", opts.tol_or(1e-12), hdw, ""));
            let reeb = canonical_reeb(spec.chart).map(|r| r.1);
            checks.push(CheckResult::from_result("reeb", 1e-12, reeb, ""));
            checks.push(gradient_check("gradients", h.field(), spec.chart, &pts, opts));
        }
        ModelKind::AlgebroidLagrangian | ModelKind::AlgebroidHamiltonian => {
            let alg = spec.algebroid()?;
            checks.extend(structure_checks(alg, opts, 50));
            let pts = samples(spec, spec.chart, 20);
            if spec.kind == ModelKind::AlgebroidLagrangian {
                let l = algebroid_lagrangian_of(spec)?;
                let sym = max_over(&pts, |x| {
                    let c = algebroid_cartan(&l, alg, x)?;
                    let h = &c.hessian;
                    Ok((0..h.len())
                        .flat_map(|r| (0..h.len()).map(move |s| (r, s)))
                        .fold(0.0f64, |m, (r, s)| m.max((h[r][s] - h[s][r]).abs())))
                });
                checks.push(CheckResult::from_result("hessian_symmetry", 1e-12, sym, ""));
                checks.push(gradient_check("gradients", l.field(), spec.chart, &pts, opts));
            } else {
                let h = hamiltonian_of(spec)?;
                checks.push(gradient_check("gradients", h.field(), spec.chart, &pts, opts));
            }
        }
    }
    Ok((checks, None))
}

fn energy_field(l: &Lagrangian) -> ScalarField {
    let mut e = l.field().scale(-1.0);
    for i in 0..l.n {
        for a in 0..l.k {
            let v = ScalarField::var(&CoordRole::Velocity { i, a }.name());
            e = e.add(&v.mul(&l.momentum_fields()[i * l.k + a]));
        }
    }
    e
}

pub(crate) fn constraint_samples(l: &Lagrangian, count: usize) -> Result<Vec<ChartPoint>> {
    let c = ChartSpec::whitney(l.k, l.n);
    random_points(c.dim(), count, SAMPLE_SEED, 1.0).into_iter().map(|x| ChartPoint::new(c, x)).collect()
}

pub(crate) fn run_constraints(l: &Lagrangian) -> Result<ConstraintReport> {
    constraint_algorithm(l, &constraint_samples(l, 8)?, tolerances::RANK_RTOL, 8)
}

fn write_constraints(out: &mut String, r: &ConstraintReport) {
    let _ = writeln!(out, "# constraint algorithm: final level {}, terminated {}", r.final_level, r.terminated);
    for lev in &r.levels {
        let _ = writeln!(out, "# level {} (dimensions {:?})", lev.level, lev.dimensions);
        for c in &lev.constraints {
            let _ = writeln!(out, "{} = {}", c.name, c.expression);
        }
    }
}

pub(crate) fn derive(spec: &ModelSpec, opts: &CommonOpts) -> CmdResult {
    let mut out = String::new();
    let mut checks = Vec::new();
    let c = spec.chart;
    match spec.kind {
        ModelKind::Lagrangian | ModelKind::SkinnerRusk => {
            let l = lagrangian_of(spec)?;
            let lc = l.chart();
            let _ = writeln!(out, "L = {}", l.field());
            for a in 0..l.k {
                for i in 0..l.n {
                    let _ = writeln!(out, "{} = {}", CoordRole::Momentum { a, i }.name(), l.momentum_fields()[i * l.k + a]);
                }
            }
            let e = energy_field(&l);
            let _ = writeln!(out, "E_L = {e}");
            for i in 0..l.n {
                let q = CoordRole::Base { i }.name();
                let _ = writeln!(out, "dL/d{q} = {}", l.field().diff(&q));
            }
            let nk = l.n * l.k;
            for r in 0..nk {
                for s in 0..nk {
                    let (vr, vs) = (
                        CoordRole::Velocity { i: r / l.k, a: r % l.k }.name(),
                        CoordRole::Velocity { i: s / l.k, a: s % l.k }.name(),
                    );
                    let _ = writeln!(out, "d2L/d{vr}d{vs} = {}", l.field().diff(&vr).diff(&vs));
                }
            }
            let pts = samples(spec, lc, 10);
            let reg = l.is_regular(&ChartPoint::new(lc, pts[0].clone())?, tolerances::RANK_RTOL)?;
            let _ = writeln!(out, "# Hessian rank {} of {nk} at the first sample", reg.rank);
            if !reg.regular || spec.kind == ModelKind::SkinnerRusk {
                let r = run_constraints(&l)?;
                write_constraints(&mut out, &r);
                checks.push(CheckResult::new(
                    "constraints_terminated",
                    if r.terminated { 0.0 } else { 1.0 },
                    0.0,
                    format!("final level {}", r.final_level),
                ));
            }
            checks.push(gradient_check("gradients", &e, lc, &pts, opts));
        }
        ModelKind::Hamiltonian | ModelKind::AlgebroidHamiltonian => {
            let h = hamiltonian_of(spec)?;
            let _ = writeln!(out, "H = {}", h.field());
            for name in c.names().iter().skip(c.k) {
                let _ = writeln!(out, "dH/d{name} = {}", h.field().diff(name));
            }
            checks.push(gradient_check("gradients", h.field(), c, &samples(spec, c, 10), opts));
        }
        ModelKind::AlgebroidLagrangian => {
            let l = algebroid_lagrangian_of(spec)?;
            let _ = writeln!(out, "L = {}", l.field());
            let mut e = l.field().scale(-1.0);
            for name in c.names().iter().skip(c.k + c.n) {
                let d = l.field().diff(name);
                let _ = writeln!(out, "dL/d{name} = {d}");
                e = e.add(&ScalarField::var(name).mul(&d));
            }
            let _ = writeln!(out, "E_L = {e}");
            checks.push(gradient_check("gradients", &e, c, &samples(spec, c, 10), opts));
        }
    }
    Ok((checks, Some(out)))
}

/// Residual columns at interior nodes, `None` on the boundary.
struct Residuals {
    names: Vec<String>,
    rows: Vec<Option<Vec<f64>>>,
}

impl Residuals {
    fn new(s: &FieldSection, groups: &[(&str, usize)]) -> Self {
        let names = groups
            .iter()
            .flat_map(|(g, len)| (0..*len).map(move |i| format!("res_{g}_{i}")))
            .collect();
        Residuals { names, rows: vec![None; s.node_count()] }
    }

    fn set(&mut self, s: &FieldSection, node: &[usize], groups: &[&[f64]]) {
        self.rows[s.grid.linear(node)] = Some(groups.iter().flat_map(|g| g.iter().copied()).collect());
    }
}

fn table(s: &FieldSection, res: &Residuals) -> Table {
    let c = s.chart;
    let names = c.names();
    let mut header: Vec<String> = names[..c.k].to_vec();
    header.extend(names[c.k..].iter().cloned());
    header.extend(res.names.iter().cloned());
    let rows = (0..s.node_count())
        .map(|l| {
            let mut row: Vec<Option<f64>> = s.grid.time_of(&s.grid.multi(l)).into_iter().map(Some).collect();
            row.extend(s.at(l)[c.k..].iter().map(|v| Some(*v)));
            match &res.rows[l] {
                Some(r) => row.extend(r.iter().map(|v| Some(*v))),
                None => row.extend(std::iter::repeat_n(None, res.names.len())),
            }
            row
        })
        .collect();
    Table { header, rows }
}

fn lagrangian_residuals(l: &Lagrangian, q: &FieldSection, res: &mut Residuals, target: &FieldSection) -> Result<()> {
    for node in q.grid.interior_nodes() {
        let r = l.el_residual_on_jet(&lagrangian_jet(q, &node)?)?;
        res.set(target, &node, &[&r]);
    }
    Ok(())
}

fn algebroid_lagrangian_residuals(
    l: &AlgebroidLagrangian,
    alg: &LieAlgebroidData,
    s: &FieldSection,
    res: &mut Residuals,
) -> Result<()> {
    let c = s.chart;
    let (k, n, m) = (c.k, c.n, c.m);
    for node in s.grid.interior_nodes() {
        let rec = second_jet(s, &node)?;
        let mut jet = LagrangianAlgebroidJet::zeros(k, n, m);
        jet.t = rec.values[..k].to_vec();
        jet.q = rec.values[k..k + n].to_vec();
        jet.y = rec.values[k + n..].to_vec();
        for a in 0..k {
            for b in 0..k {
                jet.dtime[a * k + b] = rec.first(c.t(b), a);
            }
            for i in 0..n {
                jet.dq[i * k + a] = rec.first(c.q(i), a);
            }
        }
        for al in 0..m {
            for a in 0..k {
                for b in 0..k {
                    jet.dy[(al * k + a) * k + b] = rec.first(c.y(al, a), b);
                }
            }
        }
        let r = el_algebroid_residual(l, alg, &jet)?;
        let g = r.groups();
        res.set(s, &node, &[g[0].1, g[1].1, g[2].1, g[3].1]);
    }
    Ok(())
}

fn algebroid_hamilton_residuals(
    h: &ExprHamiltonian,
    alg: &LieAlgebroidData,
    s: &FieldSection,
    res: &mut Residuals,
) -> Result<()> {
    let c = s.chart;
    let (k, n, m) = (c.k, c.n, c.m);
    // The velocity part psi^alpha_A = dH/dw^A_alpha as a section of its own, for its derivatives.
    let vc = ChartSpec::algebroid_vel(k, n, m);
    let vel = s.map(vc, |x| {
        let mut v = x[..k + n].to_vec();
        v.extend(hamilton_algebroid_velocities(h, x)?);
        Ok(v)
    })?;
    for node in s.grid.interior_nodes() {
        let rec = second_jet(s, &node)?;
        let vrec = second_jet(&vel, &node)?;
        let mut jet = HamiltonAlgebroidJet::zeros(k, n, m);
        jet.t = rec.values[..k].to_vec();
        jet.q = rec.values[k..k + n].to_vec();
        jet.w = rec.values[k + n..].to_vec();
        jet.vel = vrec.values[k + n..].to_vec();
        for a in 0..k {
            for b in 0..k {
                jet.dtime[a * k + b] = rec.first(c.t(b), a);
            }
            for i in 0..n {
                jet.dq[i * k + a] = rec.first(c.q(i), a);
            }
            for al in 0..m {
                for b in 0..k {
                    jet.dw[(a * m + al) * k + b] = rec.first(c.w(a, al), b);
                    jet.dvel[(al * k + a) * k + b] = vrec.first(vc.y(al, a), b);
                }
            }
        }
        let r = hamilton_algebroid_residual(h, alg, &jet)?;
        let g = r.groups();
        res.set(s, &node, &[g[0].1, g[1].1, g[2].1, g[3].1, g[4].1, g[5].1]);
    }
    Ok(())
}

pub(crate) fn integrate(spec: &ModelSpec, opts: &CommonOpts) -> CmdResult {
    let grid = resolve_grid(spec, opts)?;
    if opts.substeps == 0 {
        return Err(FieldError::Config("--substeps must be at least 1".into()));
    }
    let c = spec.chart;
    let (k, n, m) = (c.k, c.n, c.m);
    let tol = opts.tol_or(1e-8);
    let mut checks = Vec::new();
    let (s, res) = match spec.kind {
        ModelKind::Lagrangian => {
            let l = lagrangian_of(spec)?;
            let x0 = initial_on(spec, c, &grid)?;
            let s = integrate_kvector(&sopde_field(spec, &l)?, &x0, &grid, opts.substeps)?;
            let mut res = Residuals::new(&s, &[("el", n)]);
            lagrangian_residuals(&l, &s, &mut res, &s)?;
            (s, res)
        }
        ModelKind::SkinnerRusk => {
            let l = lagrangian_of(spec)?;
            let xl = initial_on(spec, l.chart(), &grid)?;
            let x0 = graph_point(&l, &xl.values)?;
            let field = SrField { sopde: sopde_field(spec, &l)? };
            let s = integrate_kvector(&field, &x0, &grid, opts.substeps)?;
            let proj = project_solution(&l, &s)?;
            let mut res = Residuals::new(&s, &[("el", n), ("graph", k * n)]);
            for node in s.grid.interior_nodes() {
                let r = l.el_residual_on_jet(&lagrangian_jet(&proj.psi_l, &node)?)?;
                let g = ml_residual(&l, s.node(&node))?;
                res.set(&s, &node, &[&r, &g]);
            }
            checks.push(CheckResult::new("graph_defect", proj.graph_defect, opts.tol_or(1e-10), ""));
            (s, res)
        }
        ModelKind::Hamiltonian => {
            let h = hamiltonian_of(spec)?;
            let x0 = initial_on(spec, c, &grid)?;
            let s = integrate_kvector(&HdwField { h: &h }, &x0, &grid, opts.substeps)?;
            let mut res = Residuals::new(&s, &[("velocity", k * n), ("momentum", n)]);
            for (node, r) in hamilton_residual_on_section(&h, &s)? {
                res.set(&s, &node, &[&r.velocity, &r.momentum]);
            }
            (s, res)
        }
        ModelKind::AlgebroidLagrangian => {
            let l = algebroid_lagrangian_of(spec)?;
            let alg = spec.algebroid()?;
            let x0 = initial_on(spec, c, &grid)?;
            let field = AlgebroidElField { lagrangian: &l, algebroid: alg, symmetric: false };
            let s = integrate_kvector(&field, &x0, &grid, opts.substeps)?;
            let mut res = Residuals::new(&s, &[("time", k * k), ("anchor", n * k), ("curvature", m * k * k), ("el", m)]);
            algebroid_lagrangian_residuals(&l, alg, &s, &mut res)?;
            (s, res)
        }
        ModelKind::AlgebroidHamiltonian => {
            let h = hamiltonian_of(spec)?;
            let alg = spec.algebroid()?;
            let x0 = initial_on(spec, c, &grid)?;
            let s = integrate_kvector(&AlgebroidHamiltonField { h: &h, algebroid: alg }, &x0, &grid, opts.substeps)?;
            let mut res = Residuals::new(
                &s,
                &[
                    ("time", k * k),
                    ("hamilton_q", k * n),
                    ("hamilton_p", m),
                    ("anchor", n * k),
                    ("momentum", m * k),
                    ("curvature", m * k * k),
                ],
            );
            algebroid_hamilton_residuals(&h, alg, &s, &mut res)?;
            (s, res)
        }
    };
    let t = table(&s, &res);
    checks.insert(
        0,
        CheckResult::new("max_residual", t.max_abs("res_"), tol, format!("{} nodes", s.node_count())),
    );
    Ok((checks, Some(t.to_csv())))
}
