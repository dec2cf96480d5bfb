use super::*;
use proptest::prelude::*;

fn table(names: &[&str]) -> SymbolTable {
    SymbolTable::from_roles(names.iter().map(|n| CoordRole::parse(n).unwrap()))
}

fn k2n1() -> SymbolTable {
    table(&["t1", "t2", "q1", "v1_1", "v1_2"])
}

#[test]
fn harmonic_lagrangian_value() {
    let f = ScalarField::parse("0.5*(v1_1^2 + v1_2^2)", &k2n1()).unwrap();
    assert_eq!(f.eval(&[("v1_1", 3.0), ("v1_2", 4.0)]).unwrap(), 12.5);
}

#[test]
fn literal_zero() {
    let f = ScalarField::parse("0", &k2n1()).unwrap();
    assert!(f.is_zero());
    assert!(f.free_symbols().is_empty());
}

#[test]
fn undeclared_identifier() {
    let err = ScalarField::parse("q1*vx", &k2n1()).unwrap_err();
    assert_eq!(err, FieldError::UndeclaredIdentifier("vx".into()));
}

#[test]
fn syntax_errors_carry_offsets() {
    let s = k2n1();
    match ScalarField::parse("q1 + * 2", &s).unwrap_err() {
        FieldError::Syntax { offset, .. } => assert_eq!(offset, 5),
        e => panic!("{e}"),
    }
    match ScalarField::parse("(q1", &s).unwrap_err() {
        FieldError::Syntax { offset, .. } => assert_eq!(offset, 3),
        e => panic!("{e}"),
    }
    assert!(ScalarField::parse("q1^0.5", &s).is_err());
    assert!(ScalarField::parse("q1^2^2", &s).is_err());
    assert!(ScalarField::parse("sin q1", &s).is_err());
    assert!(ScalarField::parse("2 q1", &s).is_err());
    assert!(ScalarField::parse("", &s).is_err());
    assert!(ScalarField::parse("q1 $ 2", &s).is_err());
}

#[test]
fn eval_examples() {
    let s = k2n1();
    let f = ScalarField::parse("t1 + q1", &s).unwrap();
    assert_eq!(f.eval(&[("t1", 1.0), ("q1", 2.0)]).unwrap(), 3.0);
    assert_eq!(ScalarField::parse("sin(0)", &s).unwrap().eval(&[]).unwrap(), 0.0);
    let f = ScalarField::parse("log(q1)", &s).unwrap();
    assert!(matches!(f.eval(&[("q1", 0.0)]), Err(FieldError::Domain { func: "log", .. })));
}

#[test]
fn domain_errors_never_nan() {
    let s = k2n1();
    let cases = [
        ("sqrt(q1)", -1.0),
        ("1/q1", 0.0),
        ("q1^-2", 0.0),
        ("exp(q1)", 1000.0),
        ("log(q1)", -3.0),
        ("sqrt(q1)", f64::NAN),
    ];
    for (text, x) in cases {
        let f = ScalarField::parse(text, &s).unwrap();
        assert!(
            matches!(f.eval(&[("q1", x)]), Err(FieldError::Domain { .. })),
            "{text} at {x}"
        );
        let c = f.compile(&["q1".to_string()]).unwrap();
        assert!(matches!(c.eval(&[x]), Err(FieldError::Domain { .. })));
    }
}

#[test]
fn missing_assignment() {
    let f = ScalarField::parse("q1 + t1", &k2n1()).unwrap();
    assert_eq!(
        f.eval(&[("q1", 1.0)]).unwrap_err(),
        FieldError::MissingAssignment("t1".into())
    );
}

#[test]
fn precedence_and_unary_minus() {
    let s = k2n1();
    let e = |t: &str| ScalarField::parse(t, &s).unwrap().eval(&[("q1", 3.0)]).unwrap();
    assert_eq!(e("-q1^2"), -9.0);
    assert_eq!(e("(-q1)^2"), 9.0);
    assert_eq!(e("2-3-4"), -5.0);
    assert_eq!(e("24/4/3"), 2.0);
    assert_eq!(e("2*-q1"), -6.0);
    assert_eq!(e("q1^-1"), 1.0 / 3.0);
    assert_eq!(e("1.5e2 + .5"), 150.5);
    assert_eq!(e("--q1"), 3.0);
}

#[test]
fn power_rule() {
    let f = ScalarField::parse("0.5*v1_1^2", &k2n1()).unwrap();
    let d = f.diff("v1_1");
    for v in [-2.0, 0.0, 1.5] {
        assert_eq!(d.eval(&[("v1_1", v)]).unwrap(), v);
    }
}

#[test]
fn independent_coordinate_gives_zero_field() {
    let f = ScalarField::parse("v1_1", &k2n1()).unwrap();
    assert!(f.diff("q1").is_zero());
    assert!(f.diff_declared("nope", &k2n1()).is_err());
}

#[test]
fn mixed_bilinear_is_constant_one() {
    let f = ScalarField::parse("v1_1*v1_2", &k2n1()).unwrap();
    let d = f.diff("v1_1").diff("v1_2");
    assert_eq!(d.as_constant(), Some(1.0));
}

#[test]
fn derivative_table() {
    // Each derivative against a hand-written closed form at a few points.
    let s = table(&["q1"]);
    let cases: [(&str, fn(f64) -> f64); 8] = [
        ("sin(q1)", |x| x.cos()),
        ("cos(q1)", |x| -x.sin()),
        ("exp(2*q1)", |x| 2.0 * (2.0 * x).exp()),
        ("log(q1)", |x| 1.0 / x),
        ("sqrt(q1)", |x| 0.5 / x.sqrt()),
        ("tanh(q1)", |x| 1.0 - x.tanh().powi(2)),
        ("1/q1", |x| -1.0 / (x * x)),
        ("q1^-3", |x| -3.0 * x.powi(-4)),
    ];
    for (text, exact) in cases {
        let d = ScalarField::parse(text, &s).unwrap().diff("q1");
        for x in [0.3, 1.0, 2.7] {
            let got = d.eval(&[("q1", x)]).unwrap();
            assert!((got - exact(x)).abs() <= 1e-14 * (1.0 + exact(x).abs()), "{text}");
        }
    }
}

#[test]
fn fd_check_examples() {
    let s = table(&["t1", "q1"]);
    let names: Vec<String> = s.names().to_vec();
    let f = ScalarField::parse("q1^2", &s).unwrap();
    assert!(fd_check(&f, "q1", &names, &[0.0, 1.0], 1e-4).unwrap().difference < 1e-7);
    let f = ScalarField::parse("0", &s).unwrap();
    assert_eq!(fd_check(&f, "q1", &names, &[0.0, 1.0], 1e-4).unwrap().difference, 0.0);
    let f = ScalarField::parse("exp(t1)", &s).unwrap();
    assert!(fd_check(&f, "t1", &names, &[0.0, 0.0], 1e-4).unwrap().difference < 1e-7);
    let f = ScalarField::parse("log(q1)", &s).unwrap();
    assert!(fd_check(&f, "q1", &names, &[0.0, 1e-6], 1e-4).is_err());
    assert!(fd_check(&f, "q1", &names, &[0.0, 1.0], 0.0).is_err());
}

#[test]
fn printing_is_parseable() {
    let s = k2n1();
    for text in [
        "-q1^2",
        "(-q1)^2",
        "q1 - (t1 - v1_1)",
        "q1/(t1*v1_1)",
        "-(q1 + t1)*2",
        "sin(q1)^-2 + -3",
        "2^3",
        "(-2)^3",
        "1e300*q1 + 1e-300",
    ] {
        let f = ScalarField::parse(text, &s).unwrap();
        let g = ScalarField::parse(&f.to_string(), &s).unwrap();
        assert_eq!(f, g, "{text} printed as {f}");
    }
}

#[test]
fn compiled_matches_tree() {
    let s = k2n1();
    let f = ScalarField::parse("sin(t1*q1) - v1_2/(1 + v1_1^2) + exp(-t2)", &s).unwrap();
    let names = s.names().to_vec();
    let x = [0.3, -0.7, 1.1, 0.4, -2.0];
    let c = f.compile(&names).unwrap();
    assert_eq!(c.eval(&x).unwrap(), f.eval_at(&names, &x).unwrap());
}

#[test]
fn rename_moves_variables() {
    let s = k2n1();
    let f = ScalarField::parse("v1_1*q1", &s).unwrap();
    let map = [("v1_1".to_string(), "y1_1".to_string())].into_iter().collect();
    let g = f.rename(&map);
    assert!(g.depends_on("y1_1") && !g.depends_on("v1_1"));
    assert_eq!(g.eval(&[("y1_1", 2.0), ("q1", 3.0)]).unwrap(), 6.0);
}

// Property tests ------------------------------------------------------------

const VARS: [&str; 3] = ["t1", "q1", "v1_1"];

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (0usize..3).prop_map(|i| VARS[i].to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("({c:?})")),
    ]
}

fn arb_text() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + ({b})^2))")),
            (inner.clone(), 0i32..4).prop_map(|(a, n)| format!("({a})^{n}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(tanh({a}))")),
            inner.clone().prop_map(|a| format!("log(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
        ]
    })
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5]
}

fn syms() -> SymbolTable {
    table(&VARS)
}

fn names() -> Vec<String> {
    VARS.iter().map(|s| s.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fd_agrees_with_symbolic(text in arb_text(), x in point()) {
        let f = ScalarField::parse(&text, &syms()).unwrap();
        for c in VARS {
            let r = fd_check(&f, c, &names(), &x, 1e-5).unwrap();
            prop_assert!(r.difference <= 1e-6 * (1.0 + r.symbolic.abs()), "{text} d/d{c}: {r:?}");
        }
    }

    #[test]
    fn mixed_partials_commute(text in arb_text(), x in point()) {
        let f = ScalarField::parse(&text, &syms()).unwrap();
        for a in VARS {
            for b in VARS {
                let ab = f.diff(a).diff(b).eval_at(&names(), &x).unwrap();
                let ba = f.diff(b).diff(a).eval_at(&names(), &x).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs().max(ba.abs())));
            }
        }
    }

    #[test]
    fn print_parse_round_trip(text in arb_text(), x in point()) {
        let f = ScalarField::parse(&text, &syms()).unwrap();
        let g = ScalarField::parse(&f.to_string(), &syms()).unwrap();
        let a = f.eval_at(&names(), &x).unwrap();
        let b = g.eval_at(&names(), &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(f64::MIN_POSITIVE));
        // Derivatives print and re-parse as well.
        let d = f.diff("q1");
        let e = ScalarField::parse(&d.to_string(), &syms()).unwrap();
        prop_assert_eq!(d.eval_at(&names(), &x).unwrap(), e.eval_at(&names(), &x).unwrap());
    }

    #[test]
    fn compiled_eval_is_bitwise_tree_eval(text in arb_text(), x in point()) {
        let f = ScalarField::parse(&text, &syms()).unwrap();
        let c = f.compile(&names()).unwrap();
        prop_assert_eq!(c.eval(&x).unwrap().to_bits(), f.eval_at(&names(), &x).unwrap().to_bits());
    }
}
