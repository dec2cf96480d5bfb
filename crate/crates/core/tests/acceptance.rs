//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Tolerances are pinned here and nowhere else.

use std::path::Path;
use std::time::Instant;

use fieldtk::algebroid::{reduce_standard_hamiltonian, reduce_standard_lagrangian};
use fieldtk::diagnostics::{fl_relatedness_defect, gradient_defect, legendre_section, pullback_defect, random_points};
use fieldtk::hamiltonian::{hamilton_residual_on_section, ExprHamiltonian, HamiltonianFunction, HdwField};
use fieldtk::integrator::integrate_kvector;
use fieldtk::kvector::SolveOptions;
use fieldtk::lagrangian::{lagrangian_jet, Lagrangian, SopdeField};
use fieldtk::models::{load_model, validate_algebroid, ChartPoint, ChartSpec, FieldSection, GridSpec, LieAlgebroidData, ModelKind};
use fieldtk::skinner_rusk::{constraint_algorithm, graph_point, project_solution, SrField};
use fieldtk::tulczyjew::{dh_residual, dl_residual, prolong_cotangent_section};
use fieldtk::{Result, ScalarField};

const PULLBACK_TOL: f64 = 1e-12;
const PULLBACK_SECONDS: f64 = 1.0;
const PIPELINE_TOL: f64 = 1e-8;
const GRAPH_DEFECT_TOL: f64 = 1e-10;
const PIPELINE_SECONDS: f64 = 5.0;
const FL_RELATED_TOL: f64 = 1e-9;
const DH_TOL: f64 = 1e-8;
const DL_TOL: f64 = 1e-10;
const STRUCTURE_TOL: f64 = 1e-14;
const BROKEN_MIN_DEFECT: f64 = 0.5;
const REDUCTION_TOL: f64 = 1e-12;
const ORDER_RATIO: (f64, f64) = (12.0, 20.0);
const FD_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;

const RICH_L: &str = "0.5*(v1_1^2 + v1_2^2) + (1 + 0.1*q1^2)*(v2_1^2 + v2_2^2) + 0.2*v1_1*v2_2 + t1*q2*v1_2 - cos(q1)";
const HARM_L: &str = "0.5*(v1_1^2 + v1_2^2)";
const HARM_H: &str = "0.5*(p1_1^2 + p2_1^2)";

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: String) -> Outcome {
    Outcome { pass, summary }
}

fn lag(text: &str, k: usize, n: usize) -> Lagrangian {
    let c = ChartSpec::lagrangian(k, n);
    Lagrangian::new(ScalarField::parse(text, &c.symbols()).unwrap(), k, n).unwrap()
}

fn ham(text: &str, k: usize, n: usize) -> ExprHamiltonian {
    let c = ChartSpec::hamiltonian(k, n);
    ExprHamiltonian::new(ScalarField::parse(text, &c.symbols()).unwrap(), c).unwrap()
}

fn constants(values: &[f64]) -> Vec<ScalarField> {
    values.iter().map(|&v| ScalarField::constant(v)).collect()
}

fn max_el(l: &Lagrangian, q: &FieldSection) -> Result<f64> {
    let mut worst = 0.0f64;
    for node in q.grid.interior_nodes() {
        for r in l.el_residual_on_jet(&lagrangian_jet(q, &node)?)? {
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

fn models_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/models"))
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let l = lag(RICH_L, 2, 2);
    let mut worst = 0.0f64;
    let mut used = 0;
    for x in random_points(l.chart().dim(), 100, 1, 1.0) {
        if !l.is_regular(&ChartPoint::new(l.chart(), x.clone())?, 1e-9)?.regular {
            continue;
        }
        used += 1;
        worst = worst.max(pullback_defect(&l, &x)?);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        used == 100 && worst <= PULLBACK_TOL && secs < PULLBACK_SECONDS,
        format!("pullback defect {worst:.2e} over {used} regular points in {secs:.3} s"),
    ))
}

fn harmonic_solution() -> Result<(Lagrangian, FieldSection)> {
    let l = lag(HARM_L, 2, 1);
    // initial jet of psi = t1 t2 at the origin, gauge fixing the mixed partials
    let field = SopdeField::new(&l).with_reference(&constants(&[0.0, 1.0, 1.0, 0.0]))?;
    let x0 = ChartPoint::zeros(l.chart());
    let s = integrate_kvector(&field, &x0, &GridSpec::unit_box(&[33, 33]), 1)?;
    Ok((l, s))
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let (l, s) = harmonic_solution()?;
    let mut err = 0.0f64;
    for node in s.grid.nodes() {
        let t = s.grid.time_of(&node);
        err = err.max((s.node(&node)[2] - t[0] * t[1]).abs());
    }
    let el = max_el(&l, &s)?;
    let sr = SrField { sopde: SopdeField::new(&l).with_reference(&constants(&[0.0, 1.0, 1.0, 0.0]))? };
    let w0 = graph_point(&l, &ChartPoint::zeros(l.chart()).values)?;
    let unified = integrate_kvector(&sr, &w0, &GridSpec::unit_box(&[33, 33]), 1)?;
    let proj = project_solution(&l, &unified)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        err <= PIPELINE_TOL && el <= PIPELINE_TOL && proj.graph_defect <= GRAPH_DEFECT_TOL && secs < PIPELINE_SECONDS,
        format!(
            "max |q - t1 t2| {err:.2e}, EL residual {el:.2e}, graph defect {:.2e}, {secs:.3} s",
            proj.graph_defect
        ),
    ))
}

fn criterion_3() -> Result<Outcome> {
    let l = lag(RICH_L, 2, 2);
    let mut worst = 0.0f64;
    for x in random_points(l.chart().dim(), 50, 3, 1.0) {
        worst = worst.max(fl_relatedness_defect(&l, &x, &SolveOptions::default())?);
    }
    Ok(outcome(worst <= FL_RELATED_TOL, format!("pushforward vs HDW field {worst:.2e} at 50 points")))
}

fn criterion_4() -> Result<Outcome> {
    let h = ham(HARM_H, 2, 1);
    let x0 = ChartPoint::new(h.chart(), vec![0.0, 0.0, 0.0, 1.0, 1.0])?;
    let s = integrate_kvector(&HdwField { h: &h }, &x0, &GridSpec::unit_box(&[33, 33]), 1)?;
    let mut dh = 0.0f64;
    for (_, w) in prolong_cotangent_section(&s)? {
        dh = dh.max(dh_residual(&h, &w)?.max_abs());
    }
    let hr = hamilton_residual_on_section(&h, &s)?.iter().map(|(_, r)| r.max_abs()).fold(0.0, f64::max);

    let (l, psi) = harmonic_solution()?;
    let psi_h = legendre_section(&l, &psi)?;
    let mut dl = 0.0f64;
    for (_, w) in prolong_cotangent_section(&psi_h)? {
        dl = dl.max(dl_residual(&l, &w)?.max_abs());
    }
    // (pi_Q)_1 projection: keep (t, q) and let the stencils rebuild the jet
    let q = psi_h.map(l.chart(), |x| Ok(vec![x[0], x[1], x[2], 0.0, 0.0]))?;
    let el = max_el(&l, &q)?;
    Ok(outcome(
        dh <= DH_TOL && dl <= DL_TOL && el <= DL_TOL,
        format!("dh {dh:.2e} (hamilton {hr:.2e}), dl {dl:.2e}, projected EL {el:.2e}"),
    ))
}

fn criterion_5() -> Result<Outcome> {
    let pts = random_points(1, 50, 5, 2.0);
    let so3 = validate_algebroid(&LieAlgebroidData::so3(), &pts, STRUCTURE_TOL);
    let tq_pts = random_points(3, 50, 6, 2.0);
    let tq = validate_algebroid(&LieAlgebroidData::tangent_bundle(3), &tq_pts, STRUCTURE_TOL);
    let broken = validate_algebroid(&LieAlgebroidData::broken_example(), &pts, STRUCTURE_TOL);
    let worst = |r: &fieldtk::models::AlgebroidReport| r.antisymmetry_defect.max(r.jacobi_defect).max(r.anchor_defect);
    let file = load_model(models_dir().join("so3.model"))?;
    let from_file = validate_algebroid(file.algebroid()?, &pts, STRUCTURE_TOL);
    Ok(outcome(
        so3.passes && tq.passes && from_file.passes && !broken.passes && worst(&broken) >= BROKEN_MIN_DEFECT,
        format!(
            "so(3) {:.1e}, TQ {:.1e}, so(3) file {:.1e}, broken {:.2}",
            worst(&so3),
            worst(&tq),
            worst(&from_file),
            worst(&broken)
        ),
    ))
}

fn criterion_6() -> Result<Outcome> {
    let (k, n) = (2, 2);
    let lc = ChartSpec::lagrangian(k, n);
    let lf = ScalarField::parse(RICH_L, &lc.symbols())?;
    let xs = random_points(lc.dim(), 100, 7, 1.0);
    let accs = random_points(n * k * k, 100, 8, 1.0);
    let lr = reduce_standard_lagrangian(&lf, k, n, &xs.into_iter().zip(accs).collect::<Vec<_>>())?;

    let hc = ChartSpec::hamiltonian(k, n);
    let hf = ScalarField::parse("0.5*(p1_1^2 + p2_1^2) + (p1_2^2 + p2_2^2)/(2 + q1^2) + t2*q2*p1_1 + cos(q1)*q2", &hc.symbols())?;
    let xs = random_points(hc.dim(), 100, 9, 1.0);
    let dqs = random_points(n * k, 100, 10, 1.0);
    let dps = random_points(k * n * k, 100, 11, 1.0);
    let pts: Vec<_> = xs.into_iter().zip(dqs).zip(dps).map(|((a, b), c)| (a, b, c)).collect();
    let hr = reduce_standard_hamiltonian(&hf, k, n, &pts)?;
    Ok(outcome(
        lr.max() <= REDUCTION_TOL && hr.max() <= REDUCTION_TOL,
        format!(
            "Lagrangian {:.1e}/{:.1e}, Hamiltonian {:.1e}/{:.1e} (coefficients/residuals, 100 points)",
            lr.coefficient_discrepancy, lr.residual_discrepancy, hr.coefficient_discrepancy, hr.residual_discrepancy
        ),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let samples = |l: &Lagrangian| -> Result<Vec<ChartPoint>> {
        let c = ChartSpec::whitney(l.k, l.n);
        random_points(c.dim(), 8, 12, 1.0).into_iter().map(|x| ChartPoint::new(c, x)).collect()
    };
    let l1 = lag("v1_1", 2, 1);
    let r1 = constraint_algorithm(&l1, &samples(&l1)?, 1e-9, 8)?;
    let level0: Vec<String> = r1.levels[0].constraints.iter().map(|c| c.expression.clone()).collect();
    let new1 = r1.levels.get(1).map_or(0, |l| l.constraints.len());
    let part1 = r1.terminated && r1.final_level == 1 && level0 == ["p1_1 - 1.0", "p2_1"] && new1 == 0;

    let l2 = lag("v1_1*q1", 2, 1);
    let r2 = constraint_algorithm(&l2, &samples(&l2)?, 1e-9, 8)?;
    let obstruction = r2.levels.get(1).map_or(0, |l| l.constraints.len());
    let part2 = obstruction > 0;
    Ok(outcome(
        part1 && part2,
        format!(
            "v1_1: final level {}, level 0 {:?}, {new1} new [{}]; v1_1*q1: {obstruction} level-1 constraints [{}]",
            r1.final_level,
            level0,
            if part1 { "ok" } else { "FAIL" },
            if part2 { "ok" } else { "FAIL" }
        ),
    ))
}

fn wave_error(counts: usize) -> Result<f64> {
    let spec = load_model(models_dir().join("wave.model"))?;
    assert_eq!(spec.kind, ModelKind::Lagrangian);
    let l = Lagrangian::new(spec.lagrangian()?.clone(), 2, 1)?;
    let field = SopdeField::new(&l).with_reference(spec.gauge.as_ref().expect("wave model has a gauge"))?;
    let x0 = spec.initial_point()?;
    let s = integrate_kvector(&field, &x0, &GridSpec::unit_box(&[counts, counts]), 1)?;
    let mut err = 0.0f64;
    for node in s.grid.nodes() {
        let t = s.grid.time_of(&node);
        err = err.max((s.node(&node)[2] - (t[0] + t[1]).sin()).abs());
    }
    Ok(err)
}

fn criterion_8() -> Result<Outcome> {
    let coarse = wave_error(9)?;
    let fine = wave_error(17)?;
    let ratio = coarse / fine;
    Ok(outcome(
        ratio >= ORDER_RATIO.0 && ratio <= ORDER_RATIO.1,
        format!("errors {coarse:.3e} (h=1/8), {fine:.3e} (h=1/16), ratio {ratio:.2}"),
    ))
}

fn criterion_9() -> Result<Outcome> {
    let mut fields: Vec<(String, ScalarField, Vec<String>)> = Vec::new();
    for (name, text, c) in [
        ("rich L", RICH_L, ChartSpec::lagrangian(2, 2)),
        ("harmonic H", HARM_H, ChartSpec::hamiltonian(2, 1)),
    ] {
        fields.push((name.into(), ScalarField::parse(text, &c.symbols())?, c.names()));
    }
    let mut entries: Vec<_> = std::fs::read_dir(models_dir()).map_err(|e| fieldtk::FieldError::Io(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    entries.sort();
    for p in entries {
        let spec = load_model(&p)?;
        let names = spec.chart.names();
        let stem = p.file_stem().unwrap().to_string_lossy().to_string();
        if let Some(f) = &spec.lagrangian {
            let n = match spec.kind {
                ModelKind::SkinnerRusk => ChartSpec::lagrangian(spec.chart.k, spec.chart.n).names(),
                _ => names.clone(),
            };
            fields.push((format!("{stem} L"), f.clone(), n));
        }
        if let Some(f) = &spec.hamiltonian {
            fields.push((format!("{stem} H"), f.clone(), names.clone()));
        }
        if let Some(alg) = &spec.algebroid {
            for a in 0..alg.m {
                for i in 0..alg.n {
                    fields.push((format!("{stem} rho"), alg.rho(a, i).clone(), alg.base_names().to_vec()));
                }
                for b in 0..alg.m {
                    for g in 0..alg.m {
                        fields.push((format!("{stem} C"), alg.c(g, a, b).clone(), alg.base_names().to_vec()));
                    }
                }
            }
        }
    }
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for (i, (name, f, names)) in fields.iter().enumerate() {
        for x in random_points(names.len(), 100, 100 + i as u64, 1.0) {
            let d = gradient_defect(f, names, &x, FD_STEP, true)?;
            count += 1;
            if d > worst.0 {
                worst = (d, name.clone());
            }
        }
    }
    Ok(outcome(
        worst.0 <= FD_TOL,
        format!("{} expressions x 100 points ({count} evaluations), worst {:.2e} ({})", fields.len(), worst.0, worst.1),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("pullback identities", criterion_1),
        ("harmonic pipeline", criterion_2),
        ("FL-relatedness", criterion_3),
        ("Tulczyjew submanifolds", criterion_4),
        ("structure equations", criterion_5),
        ("algebroid reduction", criterion_6),
        ("constraint algorithm", criterion_7),
        ("integrator order", criterion_8),
        ("gradient hygiene", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} {:<24} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.summary);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
