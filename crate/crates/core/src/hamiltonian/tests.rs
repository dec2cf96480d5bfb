use super::*;
use crate::kvector::SolveOptions;
use crate::models::GridSpec;
use proptest::prelude::*;

fn ham(text: &str, k: usize, n: usize) -> ExprHamiltonian {
    let c = ChartSpec::hamiltonian(k, n);
    ExprHamiltonian::new(ScalarField::parse(text, &c.symbols()).unwrap(), c).unwrap()
}

fn lag(text: &str, k: usize, n: usize) -> Lagrangian {
    let c = ChartSpec::lagrangian(k, n);
    Lagrangian::new(ScalarField::parse(text, &c.symbols()).unwrap(), k, n).unwrap()
}

const H_HARM: &str = "0.5*(p1_1^2 + p2_1^2)";

#[test]
fn hdw_examples() {
    let h = ham(H_HARM, 2, 1);
    let c = h.chart();
    let x = vec![0.1, 0.2, 0.7, 1.5, -2.0];
    let kv = hdw_kvector(&h, &x).unwrap();
    assert_eq!(kv.time_defect(), 0.0);
    assert_eq!(kv.get(0, c.q(0)), 1.5);
    assert_eq!(kv.get(1, c.q(0)), -2.0);
    for a in 0..2 {
        for b in 0..2 {
            assert_eq!(kv.get(a, c.p(b, 0)), 0.0);
        }
    }

    let h = ham("q1", 2, 1);
    let kv = hdw_kvector(&h, &x).unwrap();
    assert_eq!(kv.get(0, c.p(0, 0)), -0.5);
    assert_eq!(kv.get(1, c.p(1, 0)), -0.5);
    assert_eq!(kv.get(0, c.p(1, 0)), 0.0);
    assert_eq!(kv.get(1, c.p(0, 0)), 0.0);
    assert_eq!(kv.get(0, c.q(0)), 0.0);

    let h = ham("0", 2, 1);
    assert_eq!(hdw_kvector(&h, &x).unwrap(), KVector::canonical_time(c));
}

#[test]
fn k1_reduces_to_hamilton_equations() {
    let h = ham("0.5*p1_1^2 + 0.5*q1^2", 1, 1);
    let kv = hdw_kvector(&h, &[0.0, 2.0, 3.0]).unwrap();
    assert_eq!(kv.components, vec![1.0, 3.0, -2.0]);
}

#[test]
fn hamiltonian_rejects_velocity_symbols() {
    let c = ChartSpec::hamiltonian(2, 1);
    let f = ScalarField::parse("v1_1", &ChartSpec::lagrangian(2, 1).symbols()).unwrap();
    assert!(matches!(ExprHamiltonian::new(f, c), Err(FieldError::IllegalCoordinate { .. })));
}

fn jet(t: [f64; 2], q: f64, p: [f64; 2], dq: [f64; 2], dp: [f64; 4]) -> HamiltonJet {
    HamiltonJet { t: t.to_vec(), q: vec![q], p: p.to_vec(), dq: dq.to_vec(), dp: dp.to_vec() }
}

#[test]
fn residual_examples() {
    let h = ham(H_HARM, 2, 1);
    let (t1, t2) = (0.3, 0.8);
    // psi = t1 t2, p = (t2, t1).
    let r = hamilton_residual_on_jet(&h, &jet([t1, t2], t1 * t2, [t2, t1], [t2, t1], [0.0, 1.0, 1.0, 0.0])).unwrap();
    assert_eq!(r.max_abs(), 0.0);

    let zero = ham("0", 2, 1);
    let r = hamilton_residual_on_jet(&zero, &jet([t1, t2], 4.0, [1.0, -1.0], [0.0; 2], [0.0; 4])).unwrap();
    assert_eq!(r.max_abs(), 0.0);

    // psi = t1^2, p = (t1, 0): velocity residual (-t1, 0), momentum residual dp^1/dt1 = 1.
    let r = hamilton_residual_on_jet(&h, &jet([t1, t2], t1 * t1, [t1, 0.0], [2.0 * t1, 0.0], [1.0, 0.0, 0.0, 0.0])).unwrap();
    assert!((r.velocity[0] + t1).abs() < 1e-15);
    assert_eq!(r.velocity[1], 0.0);
    assert_eq!(r.momentum, vec![1.0]);
}

#[test]
fn residual_shape_checked() {
    let h = ham(H_HARM, 2, 1);
    let mut j = HamiltonJet::zeros(2, 1);
    j.dp.pop();
    assert!(matches!(hamilton_residual_on_jet(&h, &j), Err(FieldError::ShapeMismatch(_))));
}

#[test]
fn harmonic_section_residual_is_exact() {
    let h = ham(H_HARM, 2, 1);
    let c = h.chart();
    let s = FieldSection::from_fn(c, GridSpec::unit_box(&[9, 9]), |t| {
        vec![t[0], t[1], t[0] * t[1], t[1], t[0]]
    })
    .unwrap();
    let r = hamilton_residual_on_section(&h, &s).unwrap();
    assert_eq!(r.len(), 49);
    assert!(r.iter().all(|(_, r)| r.max_abs() <= 1e-12));
}

#[test]
fn legendre_inverse_examples() {
    let c = ChartSpec::hamiltonian(2, 1);
    let y = ChartPoint::new(c, vec![0.0, 0.0, 1.0, 3.0, 4.0]).unwrap();
    let r = hamiltonian_from_lagrangian(&lag("0.5*(v1_1^2 + v1_2^2)", 2, 1), &y, None, 1e-12, 50).unwrap();
    assert_eq!(r.v, vec![3.0, 4.0]);
    assert_eq!(r.h_value, 12.5);

    let y = ChartPoint::new(c, vec![0.0, 0.0, 1.0, 3.0, -4.0]).unwrap();
    let r = hamiltonian_from_lagrangian(&lag("0.5*(v1_1^2 - v1_2^2)", 2, 1), &y, Some(&[0.0, 0.0]), 1e-12, 50).unwrap();
    assert!((r.v[0] - 3.0).abs() < 1e-12 && (r.v[1] - 4.0).abs() < 1e-12);
    assert!((r.h_value + 3.5).abs() < 1e-12);

    let y = ChartPoint::new(c, vec![0.0, 0.0, 1.0, 0.5, 2.0]).unwrap();
    let e = hamiltonian_from_lagrangian(&lag("v1_1", 2, 1), &y, None, 1e-12, 50).unwrap_err();
    assert!(matches!(e, FieldError::NonConvergence { .. }), "{e}");
}

#[test]
fn singular_image_point_reports_singular_hessian() {
    let c = ChartSpec::hamiltonian(2, 1);
    let y = ChartPoint::new(c, vec![0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
    let e = hamiltonian_from_lagrangian(&lag("v1_1", 2, 1), &y, None, 1e-12, 50).unwrap_err();
    assert_eq!(e, FieldError::SingularHessian { rank: 0, expected: 2 });
}

#[test]
fn newton_handles_nonlinear_fiber_derivative() {
    // dL/dv = sinh-like; p = v + v^3/3.
    let l = lag("0.5*v1_1^2 + v1_1^4/12 + 0.5*v1_2^2", 2, 1);
    let c = ChartSpec::hamiltonian(2, 1);
    let v = 1.7f64;
    let y = ChartPoint::new(c, vec![0.0, 0.0, 0.0, v + v.powi(3) / 3.0, 0.25]).unwrap();
    let r = hamiltonian_from_lagrangian(&l, &y, None, 1e-12, 50).unwrap();
    assert!((r.v[0] - v).abs() < 1e-10);
    assert!((r.v[1] - 0.25).abs() < 1e-12);
}

#[test]
fn canonical_reeb_is_coordinate_time() {
    for (k, n) in [(1, 1), (2, 1), (2, 3), (3, 2)] {
        let c = ChartSpec::hamiltonian(k, n);
        let (r, res) = canonical_reeb(c).unwrap();
        assert!(res <= 1e-14);
        for a in 0..k {
            assert!((&r[a] - canonical_eta(c, a)).amax() <= 1e-14);
            // Exact relations for d/dt^A itself.
            let e = forms::basis(c.dim(), c.t(a));
            for b in 0..k {
                assert_eq!(canonical_eta(c, b).dot(&e), if a == b { 1.0 } else { 0.0 });
                assert_eq!(forms::interior(&canonical_omega(c, b), &e).amax(), 0.0);
            }
        }
    }
}

const RICH_L: &str = "0.5*(v1_1^2 + v1_2^2 + v2_1^2 + v2_2^2) + 0.3*q1*v2_1 + 0.1*t1*v1_2*q2 - cos(q1) + 0.2*v1_1*v2_2";
const RICH_H: &str = "0.5*(p1_1^2 + p2_1^2 + p1_2^2) + p2_2^2 + q1*p1_2 - t2*q1*q2 + sin(q2)";

fn arb(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.2f64..1.2, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn sopde_is_fl_related_to_hdw(x in arb(8)) {
        let l = lag(RICH_L, 2, 2);
        let lh = LegendreHamiltonian::new(l.clone());
        let sol = l.sopde_solve_at(&x, &SolveOptions::default()).unwrap();
        let kv = sol.to_kvector(&x);
        let j = l.legendre_jacobian(&x).unwrap();
        let xp = ChartPoint::new(l.chart(), x.clone()).unwrap();
        let y = l.legendre_map(&xp).unwrap();
        let hk = hdw_kvector(&lh, &y.values).unwrap();
        let hc = y.chart;
        let pushed: Vec<DVector<f64>> = (0..2).map(|a| &j * DVector::from_vec(kv.vector(a).to_vec())).collect();
        for a in 0..2 {
            for i in 0..2 {
                prop_assert!((pushed[a][hc.q(i)] - hk.get(a, hc.q(i))).abs() <= 1e-9);
            }
        }
        for i in 0..2 {
            let tr: f64 = (0..2).map(|a| pushed[a][hc.p(a, i)]).sum();
            let want: f64 = (0..2).map(|a| hk.get(a, hc.p(a, i))).sum();
            prop_assert!((tr - want).abs() <= 1e-9, "{tr} vs {want}");
        }
    }

    #[test]
    fn hdw_satisfies_coefficient_conditions(x in arb(8)) {
        let h = ham(RICH_H, 2, 2);
        let kv = hdw_kvector(&h, &x).unwrap();
        prop_assert!(hdw_condition_defect(&h, &x, &kv).unwrap() <= 1e-14);
    }

    #[test]
    fn legendre_hamiltonian_gradient_matches_differences(x in arb(8)) {
        let lh = LegendreHamiltonian::new(lag(RICH_L, 2, 2));
        let g = lh.gradient(&x).unwrap();
        let flat: Vec<f64> = g.dt.iter().chain(&g.dq).chain(&g.dp).cloned().collect();
        for s in 0..8 {
            let h = 1e-5;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[s] += h;
            xm[s] -= h;
            let fd = (lh.value(&xp).unwrap() - lh.value(&xm).unwrap()) / (2.0 * h);
            prop_assert!((fd - flat[s]).abs() <= 1e-6 * (1.0 + flat[s].abs()), "slot {s}: {fd} vs {}", flat[s]);
        }
    }

    #[test]
    fn legendre_round_trip(x in arb(8)) {
        let l = lag(RICH_L, 2, 2);
        let xp = ChartPoint::new(l.chart(), x.clone()).unwrap();
        let y = l.legendre_map(&xp).unwrap();
        let r = hamiltonian_from_lagrangian(&l, &y, None, 1e-12, 50).unwrap();
        for (a, b) in r.v.iter().zip(&x[4..]) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!((r.h_value - l.energy(&xp).unwrap()).abs() <= 1e-12 * (1.0 + r.h_value.abs()));
    }
}
