use std::path::PathBuf;
use std::process::{Command, Output};

use redsim::ensemble::EnsembleReport;

fn redsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redsim")).args(args).output().expect("binary runs")
}

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.rsl"))
        .to_string_lossy()
        .into_owned()
}

#[test]
fn run_writes_a_report_that_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let file = corpus("continuous_observer");
    let o = redsim(&["run", &file, "--runs", "4000", "--seed", "3", "--workers", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let report: EnsembleReport = serde_json::from_str(&text).unwrap();
    assert_eq!((report.runs, report.master_seed, report.schema_version), (4000, 3, 1));
    assert_eq!(report.expected_source.as_deref(), Some("analytic"));
    assert!(report.matches_expected());
    assert!(String::from_utf8_lossy(&o.stderr).contains("4000 runs in"));
}

#[test]
fn catalog_names_stand_in_for_files() {
    let a = redsim(&["run", "co_observer", "--runs", "300", "--workers", "1"]);
    let b = redsim(&["run", &corpus("co_observer"), "--runs", "300", "--workers", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn diagnostics_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rsl");
    std::fs::write(&bad, "observer alice\nobserve alice D {}\n").unwrap();
    let o = redsim(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[E003]: unresolved identifier `D`"), "{err}");
    assert!(err.contains("--> 2:15"), "{err}");
}

#[test]
fn missing_files_are_runtime_errors() {
    let o = redsim(&["oracle", "/nonexistent/x.rsl"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn trace_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = redsim(&["trace", &corpus("terminal_observer"), "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.first(), Some(&"t"));
    assert_eq!(header.last(), Some(&"hazard"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|r| r.split(',').next().unwrap().parse::<f64>().is_ok()));
}

#[test]
fn oracle_prints_probabilities() {
    let o = redsim(&["oracle", "continuous_observer", "--dt-fine", "0.005"]);
    assert_eq!(o.status.code(), Some(0));
    let p: std::collections::BTreeMap<String, f64> = serde_json::from_slice(&o.stdout).unwrap();
    assert!((p["capture"] - 0.63212).abs() < 1e-3);
}

#[test]
fn scenarios_lists_the_catalog() {
    let o = redsim(&["scenarios"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.starts_with("bare "));
}

#[test]
fn check_passes_on_the_catalog() {
    let o = redsim(&["check", "--runs", "300", "--no-oracle", "--workers", "1"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("checks passed"));
}
