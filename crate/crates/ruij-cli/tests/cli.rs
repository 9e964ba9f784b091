use std::process::{Command, Output};

use serde_json::Value;

fn ruij(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruij")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn unknown_suite_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruij(&["verify", "no-such-suite", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn fourier_suite_writes_one_passing_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruij(&["verify", "fourier", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("fourier.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "check,n,params,residual,tolerance,pass,runtime_ms");
    assert_eq!(lines.len(), 2);
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols[0], "kernel-fourier");
    assert!(cols[3].parse::<f64>().unwrap() < 1e-8);
    assert_eq!(cols[5], "true");
    let j: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fourier.json")).unwrap()).unwrap();
    assert_eq!(j["reports"].as_array().unwrap().len(), 1);
    assert_eq!(String::from_utf8_lossy(&out.stdout), csv);
}

#[test]
fn s2_suite_has_at_least_four_reports_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = ruij(&["verify", "s2-identities", "--seed", "5", "--out", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| {
        std::fs::read_to_string(d.path().join("s2-identities.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    let (ra, rb) = (read(&a), read(&b));
    assert!(ra.len() > 4);
    assert_eq!(ra, rb);
}

#[test]
fn inequalities_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruij(&["verify", "inequalities", "--n", "3", "--samples", "500", "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(csv.lines().count(), 1 + 14);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("3")));
    let bad = ruij(&["verify", "inequalities", "--n", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"params": {"omega1": 1, "omega2": 1, "g": 3}}"#).unwrap();
    let out = ruij(&["verify", "fourier", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = ruij(&["verify", "fourier", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let no_suite = ruij(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(no_suite.status.code(), Some(2));
}

#[test]
fn config_supplies_suites_params_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out_dir = dir.path().join("reports");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"params": "COMPLEX", "suites": ["fourier", "kernel-bounds"], "seed": 4, "output_path": {:?}}}"#,
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = ruij(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("kernel-bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.contains("omega1=1+0.2i"));
    assert!(out_dir.join("fourier.json").exists());
}

#[test]
fn infeasible_regime_is_a_failing_report() {
    // the symmetric periods put the Macdonald shift contour on a pole
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("symm.json");
    std::fs::write(&cfg, r#"{"params": "REAL-SYMM"}"#).unwrap();
    let out = ruij(&["verify", "eigen-macdonald", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let j: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eigen-macdonald.json")).unwrap()).unwrap();
    let failing: Vec<&Value> = j["reports"].as_array().unwrap().iter().filter(|r| r["pass"] == false).collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().all(|r| r["metadata"]["error"].is_string()));
}

#[test]
fn eval_s2_at_first_period() {
    // S₂(ω₁|ω₁, ω₂) = √(ω₂/ω₁)
    let out = ruij(&["eval-s2", "--z", "1", "--omega1", "1", "--omega2", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["value"][0].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert!(v["value"][1].as_f64().unwrap().abs() < 1e-12);
    assert!(v["error"].as_f64().unwrap() >= 0.0);
}

#[test]
fn eval_kernel_and_psi() {
    let k = json(&ruij(&["eval-kernel", "--kind", "k", "--x", "0.3"]));
    let k_neg = json(&ruij(&["eval-kernel", "--kind", "k", "--x", "-0.3"]));
    assert!((k["value"][0].as_f64().unwrap() - k_neg["value"][0].as_f64().unwrap()).abs() < 1e-14);
    let mu = json(&ruij(&["eval-kernel", "--kind", "mu", "--x", "0.5,0.1", "--omega2", "1.3"]));
    assert!(mu["value"][0].as_f64().unwrap().is_finite());
    // n = 1 wave function is the plane wave e^{2πiλx}
    let p = json(&ruij(&["eval-psi", "--lambda", "0.25", "--x", "1"]));
    assert!(p["value"][0].as_f64().unwrap().abs() < 1e-12);
    assert!((p["value"][1].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let p2 = ruij(&["eval-psi", "--lambda", "0.3,-0.2", "--x", "0.7,0.1"]);
    assert_eq!(p2.status.code(), Some(0));
    let bad = ruij(&["eval-kernel", "--kind", "k", "--x", "1", "--g", "5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_ruij"))
        .args(["eval-s2", "--z", "0.5"])
        .env("RUIJ_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_ruij"))
        .args(["eval-s2", "--z", "0.5"])
        .env("RUIJ_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
