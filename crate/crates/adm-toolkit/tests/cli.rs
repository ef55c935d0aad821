use adm_toolkit::data::cli::run_with;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("adm-toolkit").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("not json ({e}): {s}"))
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn schwarzschild_charges_pass() {
    let (code, out, err) = run(&["charges", "--family", "schwarzschild", "--m", "1"]);
    assert_eq!(code, 0, "{err}");
    let r = json(&out);
    assert_eq!(r["command"], "charges");
    assert_eq!(r["pass"], true);
    let e = r["result"]["charges"]["E"].as_f64().unwrap();
    assert!((e - 1.0).abs() <= 1e-3);
    let p = r["result"]["charges"]["P"].as_array().unwrap();
    assert!(p.iter().all(|v| v.as_f64().unwrap().abs() <= 1e-6));
    for c in r["checks"].as_array().unwrap() {
        assert!(c["name"].is_string() && c["value"].is_number() && c["tolerance"].is_number() && c["pass"] == true);
    }
    assert!(err.contains("charges: ok"));
}

#[test]
fn negative_scalar_curvature_fails_the_dec_check() {
    let (code, out, _) = run(&["dec-check", "--family", "conformal", "--c", "1", "--power", "2"]);
    assert_eq!(code, 1);
    let r = json(&out);
    assert_eq!(r["pass"], false);
    let v = &r["result"]["verdict"];
    let min = v["min_margin"].as_f64().unwrap();
    let x: Vec<f64> = v["worst_node"].as_array().unwrap().iter().map(|a| a.as_f64().unwrap()).collect();
    let r2: f64 = x.iter().map(|a| a * a).sum();
    let exact = -8.0 / (r2 * r2) * (1.0 + 1.0 / r2).powi(-5);
    assert!((min - exact).abs() <= 1e-12, "{min} vs {exact}");
    assert!((-0.27648..-0.25).contains(&min), "{min}");
    assert_eq!(check(&r, "min_dec_margin")["pass"], false);
}

#[test]
fn flux_identity_suite_passes() {
    let (code, out, _) = run(&["verify", "--suite", "flux-identities"]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["checks"].as_array().unwrap().len(), 3);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn dec_algebra_suite_passes() {
    let (code, out, _) = run(&["verify", "--suite", "dec-algebra", "--seed", "7"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["charges", "--bogus"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["charges", "--family", "schwarzschild", "--fd-order", "3"]).0, 2);
    let (code, out, err) = run(&["charges"]);
    assert_eq!(code, 2);
    assert_eq!(json(&out)["pass"], false);
    assert!(err.contains("--input or --family"));
    assert_eq!(run(&["charges", "--family", "schwarzschild", "--m", "-2"]).0, 2);
    assert_eq!(run(&["charges", "--family", "euclidean", "--r-outer", "0.5"]).0, 2);
}

#[test]
fn help_exits_with_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("dec-check") && out.contains("kid-fit"));
}

#[test]
fn missing_input_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    assert_eq!(run(&["constraints", "--input", missing.to_str().unwrap()]).0, 2);
}

#[test]
fn generated_dataset_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s");
    let p = path.to_str().unwrap();
    let (code, _, err) =
        run(&["generate", "--family", "schwarzschild", "--r-outer", "16", "--nodes", "65", "--output", p]);
    assert_eq!(code, 0, "{err}");
    let (code, out, _) = run(&["constraints", "--input", p]);
    assert_eq!(code, 0, "{out}");
    let r = json(&out);
    assert_eq!(r["result"]["family"]["kind"], "schwarzschild");
    assert!(r["result"]["mu_sup"].as_f64().unwrap() > 0.0);
    let (code, out, _) = run(&["kid-fit", "--input", p, "--radii", "3,4,5,6,7,8"]);
    assert_eq!(code, 0, "{out}");
    let fit = &json(&out)["result"]["fit"];
    assert!((fit["a"].as_f64().unwrap() - 1.0).abs() <= 1e-2);
    assert!((fit["A"].as_f64().unwrap() + 1.0).abs() <= 1e-2);
}

#[test]
fn text_reports_go_to_stdout() {
    let (code, out, err) = run(&["charges", "--family", "bowen-york", "--p", "0,0,0.5", "--report", "text"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("charges: ok"));
    assert!(serde_json::from_str::<Value>(&out).is_err());
    assert!(err.is_empty());
}

#[test]
fn tolerance_override_applies_to_every_check() {
    let (code, out, _) = run(&["charges", "--family", "schwarzschild", "--tol", "1e-9"]);
    assert_eq!(code, 1);
    let r = json(&out);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["tolerance"] == 1e-9));
    assert_eq!(check(&r, "energy_error")["pass"], false);
}

#[test]
fn flat_hamiltonian_is_zero() {
    let (code, out, _) = run(&["hamiltonian", "--family", "euclidean", "--a", "1", "--b", "0,0,1"]);
    assert_eq!(code, 0, "{out}");
    let r = json(&out);
    assert_eq!(r["result"]["volume"]["value"], 0.0);
}

#[test]
fn vacuum_constraints_hold_for_analytic_families() {
    for fam in ["euclidean", "schwarzschild"] {
        let (code, out, _) = run(&["constraints", "--family", fam]);
        assert_eq!(code, 0, "{out}");
    }
}
