use super::commands::{
    algebroid_lagrangian_of, hamiltonian_of, lagrangian_of, run_constraints, samples, sopde_field, structure_checks,
    gradient_check, CmdResult, SAMPLE_SEED,
};
use super::report::CheckResult;
use super::{initial_on, resolve_grid, CommonOpts, Suite};
use crate::algebroid::{momentum_renaming, reduce_standard_hamiltonian, reduce_standard_lagrangian, velocity_renaming};
use crate::diagnostics::{fl_relatedness_defect, legendre_section, pullback_defect, random_points};
use crate::error::{FieldError, Result};
use crate::hamiltonian::{hamiltonian_from_lagrangian, HdwField};
use crate::integrator::integrate_kvector;
use crate::kvector::SolveOptions;
use crate::lagrangian::{lagrangian_jet, Lagrangian};
use crate::linalg;
use crate::models::{ChartPoint, ChartSpec, ModelKind, ModelSpec};
use crate::skinner_rusk::{graph_point, project_solution, SrField};
use crate::tolerances;
use crate::tulczyjew::{dh_residual, dl_residual, prolong_cotangent_section};

pub(crate) fn run_suite(suite: Suite, spec: &ModelSpec, opts: &CommonOpts) -> CmdResult {
    let checks = match suite {
        Suite::Legendre => legendre(spec, opts)?,
        Suite::SkinnerRusk => skinner_rusk(spec, opts)?,
        Suite::Tulczyjew => tulczyjew(spec, opts)?,
        Suite::Structure => structure_checks(spec.algebroid()?, opts, 50),
        Suite::Reduction => reduction(spec, opts)?,
        Suite::Gradients => gradients(spec, opts)?,
        Suite::Constraints => constraints(spec)?,
    };
    Ok((checks, None))
}

fn max_over(points: &[Vec<f64>], f: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    points.iter().try_fold(0.0f64, |m, x| Ok(m.max(f(x)?)))
}

fn legendre(spec: &ModelSpec, opts: &CommonOpts) -> Result<Vec<CheckResult>> {
    let l = lagrangian_of(spec)?;
    let pts = samples(spec, l.chart(), 50);
    let round_trip = max_over(&pts, |x| {
        let y = l.legendre_map(&ChartPoint::new(l.chart(), x.to_vec())?)?;
        let inv = hamiltonian_from_lagrangian(&l, &y, None, tolerances::NEWTON_TOL, tolerances::NEWTON_MAX_ITER)?;
        let v = &x[l.k + l.n..];
        Ok(inv.v.iter().zip(v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    });
    Ok(vec![
        CheckResult::from_result("pullback", 1e-12, max_over(&pts, |x| pullback_defect(&l, x)), ""),
        CheckResult::from_result(
            "fl_related",
            opts.tol_or(1e-9),
            max_over(&pts, |x| fl_relatedness_defect(&l, x, &SolveOptions::default())),
            &format!("{} points", pts.len()),
        ),
        CheckResult::from_result("legendre_inverse", 1e-9, round_trip, ""),
    ])
}

fn skinner_rusk(spec: &ModelSpec, opts: &CommonOpts) -> Result<Vec<CheckResult>> {
    let l = lagrangian_of(spec)?;
    let grid = resolve_grid(spec, opts)?;
    let xl = initial_on(spec, l.chart(), &grid)?;
    let x0 = graph_point(&l, &xl.values)?;
    let field = SrField { sopde: sopde_field(spec, &l)? };
    let s = integrate_kvector(&field, &x0, &grid, opts.substeps)?;
    let proj = project_solution(&l, &s)?;
    let el = projected_el_lagrangian(&l, &proj.psi_l);
    Ok(vec![
        CheckResult::new("graph_defect", proj.graph_defect, 1e-10, ""),
        CheckResult::from_result("projected_el", opts.tol_or(1e-8), el, &format!("{} nodes", s.node_count())),
    ])
}

fn tulczyjew(spec: &ModelSpec, opts: &CommonOpts) -> Result<Vec<CheckResult>> {
    let grid = resolve_grid(spec, opts)?;
    match spec.kind {
        ModelKind::Hamiltonian => {
            let h = hamiltonian_of(spec)?;
            let x0 = initial_on(spec, spec.chart, &grid)?;
            let s = integrate_kvector(&HdwField { h: &h }, &x0, &grid, opts.substeps)?;
            let pts = prolong_cotangent_section(&s)?;
            let d = pts.iter().try_fold(0.0f64, |m, (_, w)| Ok::<_, FieldError>(m.max(dh_residual(&h, w)?.max_abs())));
            Ok(vec![CheckResult::from_result("dh_residual", opts.tol_or(1e-8), d, &format!("{} nodes", pts.len()))])
        }
        ModelKind::Lagrangian => {
            let l = lagrangian_of(spec)?;
            let x0 = initial_on(spec, l.chart(), &grid)?;
            let s = integrate_kvector(&sopde_field(spec, &l)?, &x0, &grid, opts.substeps)?;
            let psi_h = legendre_section(&l, &s)?;
            let pts = prolong_cotangent_section(&psi_h)?;
            let d = pts.iter().try_fold(0.0f64, |m, (_, w)| Ok::<_, FieldError>(m.max(dl_residual(&l, w)?.max_abs())));
            let el = projected_el(&l, &psi_h);
            Ok(vec![
                CheckResult::from_result("dl_residual", opts.tol_or(1e-10), d, &format!("{} nodes", pts.len())),
                CheckResult::from_result("projected_el", opts.tol_or(1e-10), el, ""),
            ])
        }
        other => Err(FieldError::Config(format!("tulczyjew suite needs a lagrangian or hamiltonian model, not {}", other.as_str()))),
    }
}

fn projected_el_lagrangian(l: &Lagrangian, psi_l: &crate::models::FieldSection) -> Result<f64> {
    let mut worst = 0.0f64;
    for node in psi_l.grid.interior_nodes() {
        worst = worst.max(linalg::max_abs(&l.el_residual_on_jet(&lagrangian_jet(psi_l, &node)?)?));
    }
    Ok(worst)
}

/// EL residual of the base projection of a cotangent section.
pub(crate) fn projected_el(l: &Lagrangian, psi_h: &crate::models::FieldSection) -> Result<f64> {
    let (k, n) = (l.k, l.n);
    let q = psi_h.map(l.chart(), |x| {
        let mut v = x[..k + n].to_vec();
        v.resize(k + n + n * k, 0.0);
        Ok(v)
    })?;
    let mut worst = 0.0f64;
    for node in q.grid.interior_nodes() {
        worst = worst.max(linalg::max_abs(&l.el_residual_on_jet(&lagrangian_jet(&q, &node)?)?));
    }
    Ok(worst)
}

fn invert(map: std::collections::BTreeMap<String, String>) -> std::collections::BTreeMap<String, String> {
    map.into_iter().map(|(a, b)| (b, a)).collect()
}

fn reduction(spec: &ModelSpec, opts: &CommonOpts) -> Result<Vec<CheckResult>> {
    let c = spec.chart;
    let (k, n) = (c.k, c.n);
    let tol = opts.tol_or(1e-12);
    if spec.kind.is_algebroid() && !spec.algebroid()?.is_standard() {
        return Err(FieldError::Config("reduction needs an algebroid with rho = identity and C = 0".into()));
    }
    let count = 100;
    match spec.kind {
        ModelKind::Lagrangian | ModelKind::SkinnerRusk | ModelKind::AlgebroidLagrangian => {
            let f = match spec.kind {
                ModelKind::AlgebroidLagrangian => spec.lagrangian()?.rename(&invert(velocity_renaming(k, n))),
                _ => spec.lagrangian()?.clone(),
            };
            let lc = ChartSpec::lagrangian(k, n);
            let xs = random_points(lc.dim(), count, SAMPLE_SEED, 1.0);
            let accs = random_points(n * k * k, count, SAMPLE_SEED + 1, 1.0);
            let pts: Vec<_> = xs.into_iter().zip(accs).collect();
            let r = reduce_standard_lagrangian(&f, k, n, &pts)?;
            Ok(vec![
                CheckResult::new("lagrangian_coefficients", r.coefficient_discrepancy, tol, format!("{count} points")),
                CheckResult::new("lagrangian_residuals", r.residual_discrepancy, tol, ""),
            ])
        }
        ModelKind::Hamiltonian | ModelKind::AlgebroidHamiltonian => {
            let f = match spec.kind {
                ModelKind::AlgebroidHamiltonian => spec.hamiltonian()?.rename(&invert(momentum_renaming(k, n))),
                _ => spec.hamiltonian()?.clone(),
            };
            let hc = ChartSpec::hamiltonian(k, n);
            let xs = random_points(hc.dim(), count, SAMPLE_SEED, 1.0);
            let dqs = random_points(n * k, count, SAMPLE_SEED + 1, 1.0);
            let dps = random_points(k * n * k, count, SAMPLE_SEED + 2, 1.0);
            let pts: Vec<_> = xs.into_iter().zip(dqs).zip(dps).map(|((a, b), c)| (a, b, c)).collect();
            let r = reduce_standard_hamiltonian(&f, k, n, &pts)?;
            Ok(vec![
                CheckResult::new("hamiltonian_coefficients", r.coefficient_discrepancy, tol, format!("{count} points")),
                CheckResult::new("hamiltonian_residuals", r.residual_discrepancy, tol, ""),
            ])
        }
    }
}

fn gradients(spec: &ModelSpec, opts: &CommonOpts) -> Result<Vec<CheckResult>> {
    let c = spec.chart;
    let pts = random_points(c.dim(), 100, SAMPLE_SEED, 1.0);
    let mut out = Vec::new();
    match spec.kind {
        ModelKind::Lagrangian | ModelKind::SkinnerRusk => {
            let l = lagrangian_of(spec)?;
            let pts = random_points(l.chart().dim(), 100, SAMPLE_SEED, 1.0);
            out.push(gradient_check("lagrangian", l.field(), l.chart(), &pts, opts));
        }
        ModelKind::AlgebroidLagrangian => {
            let l = algebroid_lagrangian_of(spec)?;
            out.push(gradient_check("lagrangian", l.field(), c, &pts, opts));
        }
        ModelKind::Hamiltonian | ModelKind::AlgebroidHamiltonian => {
            let h = hamiltonian_of(spec)?;
            out.push(gradient_check("hamiltonian", h.field(), c, &pts, opts));
        }
    }
    if let Some(alg) = &spec.algebroid {
        let names = alg.base_names().to_vec();
        let base = random_points(alg.n, 100, SAMPLE_SEED, 1.0);
        let mut worst = Ok(0.0f64);
        for f in (0..alg.m)
            .flat_map(|a| (0..alg.n).map(move |i| (a, i)))
            .map(|(a, i)| alg.rho(a, i))
            .chain((0..alg.m).flat_map(|g| (0..alg.m).flat_map(move |a| (0..alg.m).map(move |b| (g, a, b)))).map(|(g, a, b)| alg.c(g, a, b)))
        {
            worst = worst.and_then(|w| {
                base.iter().try_fold(w, |m, x| Ok(m.max(crate::diagnostics::gradient_defect(f, &names, x, 1e-5, true)?)))
            });
        }
        out.push(CheckResult::from_result("structure_functions", opts.tol_or(1e-6), worst, ""));
    }
    Ok(out)
}

fn constraints(spec: &ModelSpec) -> Result<Vec<CheckResult>> {
    let l = lagrangian_of(spec)?;
    let r = run_constraints(&l)?;
    let listing: Vec<String> = r
        .levels
        .iter()
        .flat_map(|lev| lev.constraints.iter().map(move |c| format!("L{}:{}", lev.level, c.expression)))
        .collect();
    Ok(vec![
        CheckResult::new(
            "terminated",
            if r.terminated { 0.0 } else { 1.0 },
            0.0,
            format!("final level {}; {}", r.final_level, listing.join("; ")),
        ),
        CheckResult::new("unresolved", r.unresolved as f64, 0.0, ""),
    ])
}
