//! CSV and JSON emission of verification reports.

use std::io::Write;
use std::path::Path;

use ruij_core::report::VerificationReport;
use serde::Serialize;

use crate::CliError;

/// Frozen column order of the CSV report.
pub const CSV_HEADER: &str = "check,n,params,residual,tolerance,pass,runtime_ms";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(r: &VerificationReport) -> String {
    let params = r.metadata.get("params").map(String::as_str).unwrap_or("");
    format!(
        "{},{},{},{:e},{:e},{},{:.3}",
        csv_field(&r.check_name),
        r.n,
        csv_field(params),
        r.residual,
        r.tolerance,
        r.pass,
        r.runtime_ms
    )
}

pub fn to_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct JsonRun<'a> {
    suite: &'a str,
    seed: u64,
    all_pass: bool,
    reports: &'a [VerificationReport],
}

pub fn to_json(suite: &str, seed: u64, reports: &[VerificationReport]) -> String {
    let run = JsonRun {
        suite,
        seed,
        all_pass: reports.iter().all(|r| r.pass),
        reports,
    };
    serde_json::to_string_pretty(&run).expect("reports serialize")
}

/// Writes `<suite>.csv` and `<suite>.json` into `dir`, creating it if needed.
pub fn write_reports(dir: &Path, suite: &str, seed: u64, reports: &[VerificationReport]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut csv = std::fs::File::create(dir.join(format!("{suite}.csv"))).map_err(io)?;
    csv.write_all(to_csv(reports).as_bytes()).map_err(io)?;
    let mut json = std::fs::File::create(dir.join(format!("{suite}.json"))).map_err(io)?;
    json.write_all(to_json(suite, seed, reports).as_bytes()).map_err(io)?;
    Ok(())
}
