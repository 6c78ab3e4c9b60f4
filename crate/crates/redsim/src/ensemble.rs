use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use redsim_core::catalog::{definition, expected_branch_weights, ScenarioParams};
use redsim_core::engine::{run_trajectory_with, EngineError, EventKind, RandomStream};
use redsim_core::CompiledScenario;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{Audit, Violations};
use crate::stats::{wilson_interval, within_wilson, z_score};

pub const SCHEMA_VERSION: u32 = 1;
pub const HISTOGRAM_BINS: usize = 100;
/// Normal quantile of the reported 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("run {run_index} failed: {source}")]
    Trajectory {
        run_index: u64,
        #[source]
        source: EngineError,
    },
    #[error("could not start the worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct OutcomeStat {
    pub tag: String,
    pub count: u64,
    pub frequency: f64,
    pub wilson95: (f64, f64),
    pub expected: Option<f64>,
    pub abs_diff: Option<f64>,
    pub z_score: Option<f64>,
    /// Whether the expected value lies inside the Wilson interval at z = 3.
    pub within3_sigma: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Histogram {
    pub start: f64,
    pub end: f64,
    pub bins: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct EnsembleReport {
    pub schema_version: u32,
    pub scenario: String,
    pub runs: u64,
    pub master_seed: u64,
    pub scope: String,
    pub expected_source: Option<String>,
    pub outcomes: Vec<OutcomeStat>,
    pub reductions: u64,
    pub no_op_hits: u64,
    /// How many runs ended with each number of reductions.
    pub reductions_per_run: BTreeMap<u32, u64>,
    pub steps: u64,
    pub reduction_times: Histogram,
    pub violations: Violations,
    pub max_conservation_error: f64,
    /// Kept out of the JSON so reports are byte-identical across runs.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl EnsembleReport {
    pub fn outcome(&self, tag: &str) -> Option<&OutcomeStat> {
        self.outcomes.iter().find(|o| o.tag == tag)
    }

    pub fn count(&self, tag: &str) -> u64 {
        self.outcome(tag).map_or(0, |o| o.count)
    }

    /// Attaches expected probabilities. Tags missing from `expected` are
    /// expected with probability zero.
    pub fn set_expected(&mut self, source: &str, expected: &BTreeMap<String, f64>) {
        for tag in expected.keys() {
            if self.outcome(tag).is_none() {
                self.outcomes.push(stat(tag.clone(), 0, self.runs));
            }
        }
        self.outcomes.sort_by(|a, b| a.tag.cmp(&b.tag));
        for o in &mut self.outcomes {
            let e = expected.get(&o.tag).copied().unwrap_or(0.0);
            o.expected = Some(e);
            o.abs_diff = Some((o.frequency - e).abs());
            o.z_score = z_score(o.count, self.runs, e);
            o.within3_sigma = Some(within_wilson(o.count, self.runs, e, 3.0));
        }
        self.expected_source = Some(source.to_string());
    }

    /// True when every expected value is within three Wilson sigmas.
    pub fn matches_expected(&self) -> bool {
        self.outcomes.iter().all(|o| o.within3_sigma != Some(false))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn stat(tag: String, count: u64, runs: u64) -> OutcomeStat {
    OutcomeStat {
        tag,
        count,
        frequency: count as f64 / runs as f64,
        wilson95: wilson_interval(count, runs, Z95),
        expected: None,
        abs_diff: None,
        z_score: None,
        within3_sigma: None,
    }
}

/// Integer-only partial results; merging is commutative and associative.
#[derive(Debug, Clone)]
struct Tally {
    counts: BTreeMap<Arc<str>, u64>,
    reductions: u64,
    no_ops: u64,
    per_run: BTreeMap<u32, u64>,
    steps: u64,
    bins: Vec<u64>,
    violations: Violations,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            counts: BTreeMap::new(),
            reductions: 0,
            no_ops: 0,
            per_run: BTreeMap::new(),
            steps: 0,
            bins: vec![0; HISTOGRAM_BINS],
            violations: Violations::default(),
            worst: 0.0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        for (k, v) in other.per_run {
            *self.per_run.entry(k).or_default() += v;
        }
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            *a += b;
        }
        self.reductions += other.reductions;
        self.no_ops += other.no_ops;
        self.steps += other.steps;
        self.violations.merge(&other.violations);
        self.worst = self.worst.max(other.worst);
        self
    }
}

type Partial = Result<Tally, (u64, EngineError)>;

fn merge(a: Partial, b: Partial) -> Partial {
    match (a, b) {
        (Ok(a), Ok(b)) => Ok(a.merge(b)),
        (Err(a), Err(b)) => Err(if a.0 <= b.0 { a } else { b }),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

fn run_one(scenario: &CompiledScenario, seed: u64, index: u64, mut tally: Tally) -> Partial {
    let mut audit = Audit::new();
    let out = run_trajectory_with(scenario, RandomStream::new(seed, index), &mut audit).map_err(|e| (index, e))?;
    let horizon = scenario.run_config().horizon;
    *tally.counts.entry(out.outcome_tag.clone()).or_default() += 1;
    let mut reductions = 0u32;
    for e in &out.events {
        match e.kind {
            EventKind::Reduction => {
                reductions += 1;
                let bin = ((e.t / horizon) * HISTOGRAM_BINS as f64).floor();
                tally.bins[(bin.max(0.0) as usize).min(HISTOGRAM_BINS - 1)] += 1;
            }
            EventKind::NoOp => tally.no_ops += 1,
        }
    }
    tally.reductions += reductions as u64;
    *tally.per_run.entry(reductions).or_default() += 1;
    tally.steps += out.steps;
    tally.violations.merge(&audit.violations);
    tally.worst = tally.worst.max(audit.worst_conservation);
    Ok(tally)
}

/// Runs `runs` audited trajectories, run `i` on stream `(seed, i)`, over a
/// pool of `workers` threads. The report does not depend on `workers`.
pub fn run_ensemble(
    scenario: &CompiledScenario,
    runs: u64,
    seed: u64,
    workers: usize,
) -> Result<EnsembleReport, EnsembleError> {
    if runs == 0 {
        return Err(EnsembleError::NoRuns);
    }
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EnsembleError::Pool(e.to_string()))?;
    let tally = pool
        .install(|| {
            (0..runs)
                .into_par_iter()
                .fold(|| Ok(Tally::new()), |acc, i| acc.and_then(|t| run_one(scenario, seed, i, t)))
                .reduce(|| Ok(Tally::new()), merge)
        })
        .map_err(|(run_index, source)| EnsembleError::Trajectory { run_index, source })?;

    let mut violations = tally.violations;
    violations.forbidden_edge += scenario.graph().forbidden_edges().len() as u64;
    let mut tags: Vec<Arc<str>> = scenario.possible_tags();
    tags.extend(tally.counts.keys().cloned());
    tags.sort();
    tags.dedup();
    let outcomes = tags
        .into_iter()
        .map(|t| {
            let count = tally.counts.get(&t).copied().unwrap_or(0);
            stat(t.to_string(), count, runs)
        })
        .collect();
    let run = scenario.run_config();
    Ok(EnsembleReport {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.def().kind.map_or("custom", |k| k.name()).to_string(),
        runs,
        master_seed: seed,
        scope: run.scope.name().to_string(),
        expected_source: None,
        outcomes,
        reductions: tally.reductions,
        no_op_hits: tally.no_ops,
        reductions_per_run: tally.per_run,
        steps: tally.steps,
        reduction_times: Histogram { start: 0.0, end: run.horizon, bins: tally.bins },
        violations,
        max_conservation_error: tally.worst,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Closed-form outcome probabilities, when the scenario is a catalog kind
/// with its default parameters.
pub fn analytic_expectation(scenario: &CompiledScenario) -> Option<BTreeMap<String, f64>> {
    let def = scenario.def();
    let kind = def.kind?;
    let params = ScenarioParams::for_kind(kind);
    let mut reference = definition(kind, &params).ok()?;
    reference.run = def.run.clone();
    if reference != *def {
        return None;
    }
    expected_branch_weights(kind, &params).ok()
}
