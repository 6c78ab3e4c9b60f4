//! Deterministic outcome probabilities by forward enumeration.
//!
//! Instead of sampling, the oracle carries every branch of the hit process
//! with its probability mass. All branches share one fine time grid. At each
//! step a branch loses the mass of a first hit, which moves to a new branch
//! holding only the chosen component after reduction. Because the dynamics
//! are linear, the state after a reduction depends only on the surviving
//! label and the time, so branches created by the same label in the same step
//! are merged.
//!
//! The integrator (Heun) and the hit mass (trapezoid rule) are independent of
//! the trajectory engine's, which makes the comparison a real check.

use std::collections::BTreeMap;

use redsim_core::dynamics::{EPS_DEP, InteractionEdge};
use redsim_core::engine::TriggerScope;
use redsim_core::graph::{Graph, LabelId};
use redsim_core::model::{BrainMode, ObserverId};
use redsim_core::CompiledScenario;
use thiserror::Error;

pub const BRANCH_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("the oracle does not model physiological latency")]
    LatencyUnsupported,
    #[error("fine step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("more than {BRANCH_LIMIT} live branches at t = {t}")]
    BranchExplosion { t: f64 },
    #[error("horizon {horizon} reached while the hit rate is still {hazard}")]
    HorizonExceeded { horizon: f64, hazard: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub probabilities: BTreeMap<String, f64>,
    pub dt_fine: f64,
    pub steps: u64,
    pub peak_branches: usize,
}

#[derive(Debug, Clone)]
struct Branch {
    /// Survivor of the last reduction, or the initial label.
    experienced: LabelId,
    /// Probability of this history with no hit since its last reduction.
    mass: f64,
    /// Hit mass accumulated since the last reduction, relative to `s`.
    lambda: f64,
    s: f64,
    w: Vec<f64>,
}

struct Model<'a> {
    graph: &'a Graph,
    edges: &'a [InteractionEdge],
    candidate: Vec<bool>,
    ready: Vec<bool>,
    promoted: Vec<Option<LabelId>>,
    exit_observers: &'a [ObserverId],
}

impl Model<'_> {
    fn net(&self, rates: &[f64], w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (e, &k) in self.edges.iter().zip(rates) {
            let j = k * w[e.source.idx()];
            out[e.source.idx()] -= j;
            out[e.target.idx()] += j;
        }
    }

    fn live(&self, b: &Branch, t: f64) -> bool {
        let eps = EPS_DEP * b.s;
        self.edges.iter().any(|e| e.rate.value(t) > 0.0 && b.w[e.source.idx()] > eps)
    }

    fn opens_later(&self, b: &Branch, t: f64, horizon: f64) -> bool {
        let eps = EPS_DEP * b.s;
        self.edges
            .iter()
            .any(|e| e.rate.k() > 0.0 && e.rate.start() > t && e.rate.start() < horizon && b.w[e.source.idx()] > eps)
    }

    fn exited(&self, b: &Branch) -> bool {
        let eps = EPS_DEP * b.s;
        self.exit_observers.iter().any(|&o| {
            let mut unconscious = false;
            for (i, &w) in b.w.iter().enumerate() {
                if w <= eps {
                    continue;
                }
                match self.graph.label(LabelId(i as u16)).brain(o).map(|f| f.mode) {
                    Some(BrainMode::Conscious) => return false,
                    Some(BrainMode::Unconscious) => unconscious = true,
                    _ => {}
                }
            }
            unconscious
        })
    }

    fn hazard(&self, b: &Branch, rates: &[f64], scratch: &mut [f64]) -> f64 {
        self.net(rates, &b.w, scratch);
        scratch.iter().zip(&self.candidate).filter(|(j, c)| **c && **j > 0.0).map(|(j, _)| j).sum::<f64>() / b.s
    }
}

/// Outcome probabilities of `scenario` on a grid of step `dt_fine`.
pub fn brute_force_oracle(scenario: &CompiledScenario, dt_fine: f64) -> Result<OracleResult, OracleError> {
    if !(dt_fine > 0.0 && dt_fine.is_finite()) {
        return Err(OracleError::InvalidStep(dt_fine));
    }
    let graph = scenario.graph();
    if graph.edges().iter().any(|e| e.latency > 0.0) {
        return Err(OracleError::LatencyUnsupported);
    }
    let run = scenario.run_config();
    let n = graph.len();
    let model = Model {
        graph,
        edges: graph.edges(),
        candidate: graph
            .ids()
            .map(|id| match run.scope {
                TriggerScope::ReadyOnly => graph.has_ready(id),
                TriggerScope::AllPositive => true,
            })
            .collect(),
        ready: graph.ids().map(|id| graph.has_ready(id)).collect(),
        promoted: graph.ids().map(|id| graph.id_of(&graph.label(id).promote_ready())).collect(),
        exit_observers: scenario.exit_observers(),
    };
    let mut cuts: Vec<f64> = graph.edges().iter().flat_map(|e| e.rate.breakpoints()).filter(|t| *t > 0.0).collect();
    cuts.push(run.horizon);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut initial = vec![0.0; n];
    initial[graph.initial().idx()] = 1.0;
    let mut branches = vec![Branch { experienced: graph.initial(), mass: 1.0, lambda: 0.0, s: 1.0, w: initial }];
    let mut probabilities: BTreeMap<String, f64> = BTreeMap::new();
    let mut finish = |b: &Branch, exited: bool| {
        let tag = if exited { scenario.exit_tag(b.experienced) } else { scenario.tag(b.experienced) };
        *probabilities.entry(tag.to_string()).or_default() += b.mass;
    };

    let (mut k1, mut k2, mut w_pred, mut w_next) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut gains = vec![0.0; n];
    let mut spawned: Vec<f64> = vec![0.0; n];
    let mut rates = vec![0.0; graph.edges().len()];
    let mut t = 0.0f64;
    let mut steps = 0u64;
    let mut peak = 1;
    let mut grid = 0u64;

    while !branches.is_empty() {
        // Retire branches that are done, exactly as a trajectory would stop.
        let mut kept = Vec::with_capacity(branches.len());
        for b in branches.drain(..) {
            if model.exited(&b) {
                finish(&b, true);
            } else if t >= run.horizon {
                let h = model.hazard(&b, rates_at(&model, t, &mut rates), &mut k1);
                if h > 0.0 {
                    return Err(OracleError::HorizonExceeded { horizon: run.horizon, hazard: h });
                }
                finish(&b, false);
            } else if b.mass <= 0.0 {
                continue;
            } else if model.live(&b, t) || model.opens_later(&b, t, run.horizon) {
                kept.push(b);
            } else {
                finish(&b, false);
            }
        }
        branches = kept;
        if branches.is_empty() {
            break;
        }
        if branches.len() > BRANCH_LIMIT {
            return Err(OracleError::BranchExplosion { t });
        }
        peak = peak.max(branches.len());

        // Next grid point, never stepping across a rate breakpoint.
        grid += 1;
        let mut t_next = (grid as f64 * dt_fine).min(run.horizon);
        if let Some(&cut) = cuts.iter().find(|&&c| c > t + 1e-12) {
            if cut < t_next - 1e-12 {
                t_next = cut;
                grid = (cut / dt_fine).floor() as u64;
            }
        }
        let h = t_next - t;
        let mid = 0.5 * (t + t_next);
        for (r, e) in rates.iter_mut().zip(model.edges) {
            *r = e.rate.value(mid);
        }
        steps += 1;
        spawned.iter_mut().for_each(|x| *x = 0.0);

        for b in &mut branches {
            if !model.live(b, mid) {
                continue;
            }
            model.net(&rates, &b.w, &mut k1);
            for i in 0..n {
                w_pred[i] = b.w[i] + h * k1[i];
            }
            model.net(&rates, &w_pred, &mut k2);
            for i in 0..n {
                w_next[i] = b.w[i] + 0.5 * h * (k1[i] + k2[i]);
            }
            model.net(&rates, &w_next, &mut k2);
            let mut total = 0.0;
            for i in 0..n {
                gains[i] = if model.candidate[i] { 0.5 * h * (k1[i].max(0.0) + k2[i].max(0.0)) } else { 0.0 };
                total += gains[i];
            }
            b.w.copy_from_slice(&w_next);
            if total <= 0.0 {
                continue;
            }
            let d_lambda = total / b.s;
            let p = if b.lambda >= 1.0 { 1.0 } else { (d_lambda / (1.0 - b.lambda)).min(1.0) };
            let hit = b.mass * p;
            let mut reduced = 0.0;
            for i in 0..n {
                if gains[i] > 0.0 && model.ready[i] {
                    let share = hit * gains[i] / total;
                    spawned[i] += share;
                    reduced += share;
                }
            }
            b.mass -= reduced;
            b.lambda += d_lambda;
        }

        for (i, &mass) in spawned.iter().enumerate() {
            if mass <= 0.0 {
                continue;
            }
            let survivor = model.promoted[i].expect("ready labels have a promoted label");
            let mut w = vec![0.0; n];
            w[survivor.idx()] = 1.0;
            branches.push(Branch { experienced: survivor, mass, lambda: 0.0, s: 1.0, w });
        }
        t = t_next;
    }
    Ok(OracleResult { probabilities, dt_fine, steps, peak_branches: peak })
}

fn rates_at<'r>(model: &Model<'_>, t: f64, rates: &'r mut [f64]) -> &'r [f64] {
    for (r, e) in rates.iter_mut().zip(model.edges) {
        *r = e.rate.value(t);
    }
    rates
}
