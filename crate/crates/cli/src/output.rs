//! CSV and text writers. Floats are printed in Rust's shortest round-trip
//! form so reruns produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use slowfast_core::{ConditionReport, CoupledRun};

use crate::error::CliError;
use crate::experiments::{ConvergenceReport, DiagnosticsReport, DiagnosticsRow, FbarReport};

pub const CONVERGENCE_HEADER: [&str; 6] = ["epsilon", "delta", "error_mean", "error_stderr", "replicas", "wall_time_s"];
pub const DIAGNOSTICS_HEADER: [&str; 5] = ["suite", "param", "value_mean", "value_stderr", "replicas"];
pub const KHASMINSKII_HEADER: [&str; 5] = ["delta", "epsilon", "statistic_mean", "statistic_stderr", "replicas"];
pub const CONDITIONS_HEADER: [&str; 5] = ["condition", "samples", "violations", "worst_margin", "constants"];
pub const FBAR_HEADER: [&str; 3] = ["node", "value", "std_error"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "node", "s", "x", "y"];

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_convergence(path: &Path, report: &ConvergenceReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.epsilon.to_string(),
            r.delta.to_string(),
            r.error_mean.to_string(),
            r.error_stderr.to_string(),
            r.replicas.to_string(),
            format!("{:.3}", r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn convergence_summary(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    for r in &report.rows {
        let _ = write!(
            s,
            "epsilon {:<8} delta {:<10.5} error {:.6e} +- {:.2e}",
            r.epsilon, r.delta, r.error_mean, r.error_stderr
        );
        if let Some(f) = &r.failure {
            let _ = write!(s, "  FAILED: {f}");
        }
        s.push('\n');
    }
    match (&report.fit, &report.fit_note) {
        (Some(f), _) => {
            let _ = writeln!(s, "log-log slope {:.4}, intercept {:.4}, r2 {:.4}", f.slope, f.intercept, f.r_squared);
        }
        (None, Some(note)) => {
            let _ = writeln!(s, "log-log fit: {note}");
        }
        (None, None) => {}
    }
    let _ = writeln!(s, "{}", if report.passed { "PASS" } else { "FAIL" });
    s
}

fn write_diagnostic_rows<'a>(path: &Path, rows: impl Iterator<Item = &'a DiagnosticsRow>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(DIAGNOSTICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.suite.to_string(),
            r.param.clone(),
            r.value_mean.to_string(),
            r.value_stderr.to_string(),
            r.replicas.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `diagnostics.csv` with every suite, one `diagnostics_<suite>.csv`
/// per suite and `khasminskii.csv`.
pub fn write_diagnostics(dir: &Path, report: &DiagnosticsReport) -> Result<(), CliError> {
    write_diagnostic_rows(&dir.join("diagnostics.csv"), report.rows.iter())?;
    let mut suites: Vec<&str> = report.rows.iter().map(|r| r.suite).collect();
    suites.dedup();
    for suite in suites {
        let path = dir.join(format!("diagnostics_{suite}.csv"));
        write_diagnostic_rows(&path, report.rows.iter().filter(|r| r.suite == suite))?;
    }
    let mut w = writer(&dir.join("khasminskii.csv"))?;
    w.write_record(KHASMINSKII_HEADER)?;
    for r in &report.khasminskii {
        w.write_record([
            r.delta.to_string(),
            r.epsilon.to_string(),
            r.statistic_mean.to_string(),
            r.statistic_stderr.to_string(),
            r.replicas.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn diagnostics_summary(report: &DiagnosticsReport) -> String {
    let mut s = String::new();
    for v in &report.verdicts {
        let _ = writeln!(s, "{:<12} {}  {}", v.suite, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    s
}

fn constants_field(report: &ConditionReport) -> String {
    report.fitted_constants.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

pub fn write_conditions(path: &Path, reports: &[ConditionReport]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(CONDITIONS_HEADER)?;
    for r in reports {
        w.write_record([
            r.condition_id.label().to_string(),
            r.samples.to_string(),
            r.violations.to_string(),
            r.worst_margin.to_string(),
            constants_field(r),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fbar(path: &Path, report: &FbarReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(FBAR_HEADER)?;
    let est = &report.estimate;
    for (i, (v, se)) in est.value.values().iter().zip(est.std_error.values()).enumerate() {
        w.write_record([i.to_string(), v.to_string(), se.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(path: &Path, run: &CoupledRun, dt_macro: f64) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for (n, (x, y)) in run.x.iter().zip(&run.y).enumerate() {
        let t = n as f64 * dt_macro;
        let grid = x.grid();
        for (i, (xv, yv)) in x.values().iter().zip(y.values()).enumerate() {
            w.write_record([t.to_string(), i.to_string(), grid.node(i).to_string(), xv.to_string(), yv.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}
