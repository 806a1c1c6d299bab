use std::process::{Command, Output};

use serde_json::Value;

fn pgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgl")).args(args).env_remove("PGL_TOL").output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

#[test]
fn unitary_multiplicative_seed_42() {
    let out = pgl(&["--suite", "unitary-multiplicative", "--seed", "42", "--trials", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["failures"], 0);
    assert!(r["max_residual"].as_f64().unwrap() <= 1e-9);
    assert!(r["per_check"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn all_is_deterministic_up_to_timing() {
    let strip = |out: &Output| {
        let mut r = report(out);
        r["wall_time_ms"] = Value::from(0);
        r
    };
    let a = pgl(&["--suite", "all", "--trials", "10", "--seed", "3"]);
    let b = pgl(&["--suite", "all", "--trials", "10", "--seed", "3", "--sequential"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(strip(&a), strip(&b));
    let ra = report(&a);
    let names: Vec<&str> = ra["per_check"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"polar/reconstruction"));
    assert!(names.contains(&"kks/schouten"));
}

#[test]
fn unknown_suite_exits_nonzero_with_message() {
    let out = pgl(&["--suite", "no-such-suite"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-suite"));
    assert!(out.stdout.is_empty());
}

#[test]
fn mutated_run_exits_one() {
    let out = pgl(&["--suite", "cotangent-axioms", "--trials", "3", "--mutate"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["mutated"], true);
    assert!(r["failures"].as_u64().unwrap() > 0);
}

#[test]
fn tolerance_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_pgl"))
        .args(["--suite", "polar", "--trials", "2"])
        .env("PGL_TOL", "1e-7")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(report(&out)["tol"], 1e-7);
}

#[test]
fn text_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.txt");
    let out = pgl(&["--suite", "schatten", "--trials", "4", "--format", "text", "--report", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("suite schatten"));
    assert!(text.contains("failures 0"));
}

#[test]
fn gen_instance_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = pgl(&["gen-instance", "structure-constants", "--dim", "3", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["kind"], "structure-constants");
}

#[test]
fn operator_sample_instance_drives_polar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.json");
    assert!(pgl(&["gen-instance", "operator-sample", "--dim", "4", "--seed", "1", "--out", path.to_str().unwrap()]).status.success());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["matrices"][0]["rows"], 4);
    assert_eq!(v["matrices"][0]["cols"], 4);

    let p = path.to_str().unwrap();
    let out = pgl(&["--suite", "polar", "--trials", "3", "--instance", p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // a suite that takes no such instance refuses it
    let out = pgl(&["--suite", "gl-orbits", "--instance", p]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_kind_and_malformed_instance() {
    let out = pgl(&["gen-instance", "tensor"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"kind":"algebra-spec","n":3,"blocks":[2,2]}"#).unwrap();
    let out = pgl(&["--suite", "polar", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn list_suites_names_every_suite() {
    let out = pgl(&["--list-suites"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["linear-perp", "unitary-cocycle", "cotangent-symplectic", "mvn-orbits", "pair-subpoisson", "all"] {
        assert!(text.contains(name), "{name} missing");
    }
}
