use super::*;

fn model(name: &str) -> String {
    format!("{}/models/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run_args(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["fieldtk"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_model(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn check_examples() {
    let (code, out, _) = run_args(&["check", &model("harmonic.model"), "--json"]);
    assert_eq!(code, 0, "{out}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["regular", "pullback", "gradients"]);

    let (code, out, _) = run_args(&["check", &model("singular.model")]);
    assert_eq!(code, 1);
    assert!(out.contains("regular") && out.contains("rank 0 of 2"), "{out}");

    let (code, out, _) = run_args(&["check", &model("so3.model")]);
    assert_eq!(code, 0, "{out}");
    let (code, _, _) = run_args(&["check", &model("broken.model")]);
    assert_eq!(code, 1);
}

#[test]
fn integrate_harmonic_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let (code, out, err) =
            run_args(&["integrate", &model("harmonic_h.model"), "--grid", "33,33", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0, "{out}{err}");
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 1089);
    assert_eq!(lines[0], "t1,t2,q1,p1_1,p2_1,res_velocity_0,res_velocity_1,res_momentum_0");
    let mut worst = 0.0f64;
    for l in &lines[1..] {
        let cells: Vec<&str> = l.split(',').collect();
        let t1: f64 = cells[0].parse().unwrap();
        let t2: f64 = cells[1].parse().unwrap();
        let q: f64 = cells[2].parse().unwrap();
        assert!((q - t1 - t2).abs() <= 1e-12);
        for c in &cells[5..] {
            if !c.is_empty() {
                worst = worst.max(c.parse::<f64>().unwrap().abs());
            }
        }
    }
    assert!(worst <= 1e-8);
}

#[test]
fn integrate_zero_hamiltonian_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(
        &dir,
        "zero.model",
        "[model]\nkind = hamiltonian\nk = 2\nn = 1\n[expressions]\nH = 0\n[initial]\nq1 = 0.5\np1_1 = 0.25\np2_1 = -1\n",
    );
    let (code, out, err) = run_args(&["integrate", &m, "--grid", "5,4"]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r[2..5] == ["0.5", "0.25", "-1"]));
    // the report went to stderr because stdout carries the CSV
    assert!(err.contains("max_residual"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, "noinit.model", "[model]\nkind = hamiltonian\nk = 1\nn = 1\n[expressions]\nH = p1_1^2\n");
    let (code, _, err) = run_args(&["integrate", &m, "--grid", "5"]);
    assert_eq!(code, 2);
    assert!(err.contains("[initial]"), "{err}");

    assert_eq!(run_args(&["verify", "nonsense", &model("harmonic.model")]).0, 2);
    assert_eq!(run_args(&["check", "/nonexistent/x.model"]).0, 2);
    assert_eq!(run_args(&["integrate", &model("harmonic.model"), "--grid", "33"]).0, 2);
    assert_eq!(run_args(&["verify", "structure", &model("harmonic.model")]).0, 2);
    assert_eq!(run_args(&["frobnicate"]).0, 2);
    assert_eq!(run_args(&["--help"]).0, 0);
}

#[test]
fn verify_suites_on_catalog() {
    for (suite, m) in [
        ("legendre", "harmonic.model"),
        ("skinner-rusk", "harmonic_sr.model"),
        ("tulczyjew", "harmonic.model"),
        ("tulczyjew", "harmonic_h.model"),
        ("structure", "so3.model"),
        ("reduction", "tq.model"),
        ("reduction", "harmonic_h.model"),
        ("gradients", "so3_h.model"),
        ("constraints", "singular.model"),
    ] {
        let (code, out, err) = run_args(&["verify", suite, &model(m), "--json"]);
        assert_eq!(code, 0, "{suite} {m}: {out}{err}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["command"], format!("verify {suite}"));
        assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn skinner_rusk_verify_reports_defects() {
    let (code, out, _) = run_args(&["verify", "skinner-rusk", &model("harmonic_sr.model"), "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks[0]["name"], "graph_defect");
    assert!(checks[0]["defect"].as_f64().unwrap() <= 1e-10);
    assert!(checks[1]["defect"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn grid_flags_override_model() {
    let spec = crate::models::load_model(model("harmonic.model")).unwrap();
    let g = resolve_grid(&spec, &CommonOpts::default()).unwrap();
    assert_eq!(g.counts, vec![33, 33]);
    let opts = CommonOpts { grid: Some(vec![5, 9]), origin: Some(vec![-1.0, 0.0]), ..Default::default() };
    let g = resolve_grid(&spec, &opts).unwrap();
    assert_eq!(g.spacing, vec![0.25, 0.125]);
    assert_eq!(g.origin, vec![-1.0, 0.0]);
}

#[test]
fn derive_lists_constraints() {
    let (code, out, _) = run_args(&["derive", &model("singular.model")]);
    assert_eq!(code, 0);
    assert!(out.contains("phi0_1_1 = p1_1 - 1.0"));
    assert!(out.contains("phi0_2_1 = p2_1"));
    assert!(out.contains("p1_1 = 1.0"));
}

#[test]
fn wave_integration_matches_exact_solution() {
    let (code, out, _) = run_args(&["integrate", &model("wave.model"), "--substeps", "4"]);
    assert_eq!(code, 0);
    for l in out.lines().skip(1) {
        let c: Vec<f64> = l.split(',').take(3).map(|s| s.parse().unwrap()).collect();
        assert!((c[2] - (c[0] + c[1]).sin()).abs() <= 1e-6, "{l}");
    }
}
