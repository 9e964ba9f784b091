//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs `ruij verify all` twice with the same seed. The first run's JSON feeds
//! criteria 1 to 11; criterion 12 compares the two CSV files with the timing
//! column removed.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

const SEED: &str = "20240601";

struct Report {
    check: String,
    n: u64,
    residual: f64,
    tolerance: f64,
    pass: bool,
    runtime_ms: f64,
    meta: serde_json::Map<String, Value>,
}

fn load(dir: &Path) -> Vec<Report> {
    let text = std::fs::read_to_string(dir.join("all.json")).expect("all.json written");
    let v: Value = serde_json::from_str(&text).expect("valid JSON");
    v["reports"]
        .as_array()
        .expect("report list")
        .iter()
        .map(|r| Report {
            check: r["check_name"].as_str().unwrap_or_default().to_string(),
            n: r["n"].as_u64().unwrap_or(0),
            residual: r["residual"].as_f64().unwrap_or(f64::NAN),
            tolerance: r["tolerance"].as_f64().unwrap_or(f64::NAN),
            pass: r["pass"].as_bool().unwrap_or(false),
            runtime_ms: r["runtime_ms"].as_f64().unwrap_or(f64::NAN),
            meta: r["metadata"].as_object().cloned().unwrap_or_default(),
        })
        .collect()
}

/// Outcome of one criterion: every selected report passes, was judged at a
/// tolerance no looser than the pinned one, stays within it, and the total
/// runtime stays within budget.
fn judge(reports: &[Report], select: impl Fn(&Report) -> bool, tol: impl Fn(&Report) -> f64, budget_s: f64) -> (bool, String) {
    let chosen: Vec<&Report> = reports.iter().filter(|r| select(r)).collect();
    if chosen.is_empty() {
        return (false, "no reports".into());
    }
    let worst = chosen
        .iter()
        .map(|r| if tol(r) > 0.0 { r.residual / tol(r) } else { r.residual })
        .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    let time: f64 = chosen.iter().map(|r| r.runtime_ms).sum::<f64>() / 1e3;
    let ok = chosen.iter().all(|r| r.pass && r.tolerance <= tol(r) && r.residual <= tol(r)) && time <= budget_s;
    (
        ok,
        format!("{} checks, worst residual/tolerance {worst:.2e}, {time:.1} s of {budget_s} s", chosen.len()),
    )
}

fn strip_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() {
    let bin = env!("CARGO_BIN_EXE_ruij");
    let tmp = std::env::temp_dir().join(format!("ruij-acceptance-{}", std::process::id()));
    let dirs = [tmp.join("run1"), tmp.join("run2")];
    let mut statuses = Vec::new();
    for d in &dirs {
        let st = Command::new(bin)
            .args(["verify", "all", "--seed", SEED, "--out"])
            .arg(d)
            .stdout(std::process::Stdio::null())
            .status()
            .expect("binary runs");
        statuses.push(st.code());
    }
    let reports = load(&dirs[0]);
    let is = |names: &'static [&'static str]| move |r: &Report| names.contains(&r.check.as_str());
    let fixed = |t: f64| move |_: &Report| t;

    let mut lines: Vec<(usize, &str, (bool, String))> = Vec::new();
    lines.push((
        1,
        "double sine identities",
        judge(
            &reports,
            is(&["s2-inversion", "s2-shift-first", "s2-shift-second", "s2-homogeneity", "s2-period-swap"]),
            fixed(1e-9),
            10.0,
        ),
    ));
    lines.push((2, "residue at the origin", judge(&reports, is(&["s2-residue-origin"]), fixed(1e-8), 10.0)));
    lines.push((3, "Fourier transform of K", judge(&reports, is(&["kernel-fourier"]), fixed(1e-8), 5.0)));
    lines.push((
        4,
        "basic integrals and recurrences",
        judge(
            &reports,
            is(&["closed-form-j", "closed-form-i", "recurrence-ij1", "recurrence-ij2"]),
            |r| match (r.check.as_str(), r.n) {
                ("recurrence-ij1" | "recurrence-ij2", _) => 1e-5,
                (_, 1) => 1e-8,
                _ => 1e-5,
            },
            600.0,
        ),
    ));
    lines.push((
        5,
        "Baxter eigen-relation",
        judge(&reports, is(&["baxter-eigen", "dual-baxter-eigen"]), |r| if r.n == 1 { 1e-8 } else { 1e-4 }, 600.0),
    ));
    lines.push((
        6,
        "Macdonald eigen-relation",
        judge(&reports, is(&["macdonald-eigen", "dual-macdonald-eigen"]), |r| if r.n == 1 { 1e-12 } else { 1e-5 }, 900.0),
    ));
    lines.push((7, "duality", judge(&reports, is(&["duality"]), fixed(1e-4), 600.0)));
    lines.push((8, "gauge equivalence", judge(&reports, is(&["gauge-conjugation"]), fixed(1e-8), 60.0)));
    lines.push((
        9,
        "delta sequence",
        judge(
            &reports,
            is(&["delta-sequence", "delta-off-support"]),
            |r| match (r.check.as_str(), r.n) {
                ("delta-off-support", _) => 1e-6,
                (_, 1) => 1e-3,
                _ => 5e-2,
            },
            1200.0,
        ),
    ));
    lines.push((
        10,
        "Plancherel, inversion and c1",
        judge(&reports, |r| r.n == 1 && ["plancherel", "inversion", "measured-c1"].contains(&r.check.as_str()), fixed(1e-6), 600.0),
    ));
    let ineq = judge(&reports, |r| r.check.starts_with("inequality-"), fixed(0.0), 60.0);
    let sizes_ok = [2u64, 3, 4].iter().all(|n| {
        reports
            .iter()
            .filter(|r| r.check.starts_with("inequality-") && r.n == *n)
            .all(|r| r.meta.get("samples").and_then(Value::as_str) == Some("100000"))
    });
    lines.push((11, "inequalities", (ineq.0 && sizes_ok, ineq.1)));

    let csv = |d: &Path| std::fs::read_to_string(d.join("all.csv")).unwrap_or_default();
    let (a, b) = (csv(&dirs[0]), csv(&dirs[1]));
    let same = !a.is_empty() && strip_timing(&a) == strip_timing(&b);
    lines.push((
        12,
        "determinism of verify all",
        (same, format!("{} rows, exit codes {:?}", a.lines().count().saturating_sub(1), statuses)),
    ));

    let mut failures = 0;
    for (k, name, (ok, detail)) in &lines {
        println!("criterion {k:>2} {}: {name} ({detail})", if *ok { "PASS" } else { "FAIL" });
        failures += usize::from(!ok);
    }
    let _ = std::fs::remove_dir_all(&tmp);
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
