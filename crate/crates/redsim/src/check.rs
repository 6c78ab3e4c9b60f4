//! The invariant suite behind `redsim check`.

use std::collections::BTreeMap;
use std::fmt;

use redsim_core::catalog::{build, ScenarioKind, ScenarioParams};
use redsim_core::CompiledScenario;

use crate::ensemble::{analytic_expectation, run_ensemble, EnsembleReport};
use crate::oracle::brute_force_oracle;
use crate::trace::trace;

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub runs: u64,
    pub seed: u64,
    pub workers: usize,
    /// Compare against the oracle where no closed form exists.
    pub oracle: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { runs: 2000, seed: 1, workers: 1, oracle: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub scenario: &'static str,
    pub check: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "ok  " } else { "FAIL" };
        write!(f, "{status} {:<22} {:<14} {}", self.scenario, self.check, self.detail)
    }
}

fn result(scenario: &'static str, check: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { scenario, check, passed, detail }
}

fn describe(expected: &BTreeMap<String, f64>, report: &EnsembleReport) -> String {
    expected
        .iter()
        .map(|(tag, p)| format!("{tag} {:.4}/{p:.4}", report.outcome(tag).map_or(0.0, |o| o.frequency)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn check_kind(kind: ScenarioKind, sc: &CompiledScenario, opts: &CheckOptions, out: &mut Vec<CheckResult>) {
    let name = kind.name();
    let report = match run_ensemble(sc, opts.runs, opts.seed, opts.workers) {
        Ok(r) => r,
        Err(e) => {
            out.push(result(name, "ensemble", false, e.to_string()));
            return;
        }
    };
    let total: u64 = report.outcomes.iter().map(|o| o.count).sum();
    out.push(result(name, "counts", total == report.runs, format!("{total} of {} runs tagged", report.runs)));
    let v = report.violations;
    out.push(result(name, "violations", v.total() == 0, format!("{v:?}")));

    match trace(sc, opts.seed, 0) {
        Ok(tr) => {
            let worst = tr.worst_conservation();
            out.push(result(name, "conservation", worst <= 1e-9, format!("worst relative error {worst:.2e}")));
        }
        Err(e) => out.push(result(name, "conservation", false, e.to_string())),
    }

    let expected = match analytic_expectation(sc) {
        Some(e) => Some(("closed form", e)),
        None if opts.oracle => match brute_force_oracle(sc, sc.run_config().dt / 10.0) {
            Ok(o) => Some(("oracle", o.probabilities)),
            Err(e) => {
                out.push(result(name, "oracle", false, e.to_string()));
                None
            }
        },
        None => None,
    };
    if let Some((source, expected)) = expected {
        let mut report = report;
        report.set_expected(source, &expected);
        let label = if source == "oracle" { "oracle" } else { "closed form" };
        out.push(result(name, label, report.matches_expected(), describe(&expected, &report)));
    }
}

/// Runs every check over the default catalog.
pub fn run_checks(opts: &CheckOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for kind in ScenarioKind::ALL {
        match build(kind, &ScenarioParams::for_kind(kind)) {
            Ok(sc) => check_kind(kind, &sc, opts, &mut out),
            Err(e) => out.push(result(kind.name(), "build", false, e.to_string())),
        }
    }
    out
}
