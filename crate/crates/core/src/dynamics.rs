//! Deterministic weight flow between stochastic hits.
//!
//! Every edge drains its source linearly, `J = k(t) * w_source(t - latency)`,
//! and the weights follow `dw/dt = net current` under classical RK4. Rates are
//! piecewise constant, so callers align steps with [`Graph::breakpoints`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::TriggerScope;
use crate::graph::{Graph, LabelId};

/// Relative weight (fraction of `s`) below which a source counts as drained.
pub const EPS_DEP: f64 = 1e-12;
/// Largest allowed `hazard * dt` per step.
pub const MAX_HAZARD_STEP: f64 = 0.01;
/// Largest allowed relative loss of a draining component per step.
pub const MAX_RELATIVE_DRAIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step of {dt} is too large: {reason}")]
    StepTooLarge { dt: f64, reason: String },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RateFunction {
    Const { k: f64 },
    /// `k` on `[start, end)`, zero elsewhere.
    Window { k: f64, start: f64, end: f64 },
    /// Rectangular pulse of height `k` on `[center - width/2, center + width/2)`.
    Pulse { k: f64, center: f64, width: f64 },
}

impl RateFunction {
    pub fn k(&self) -> f64 {
        match *self {
            RateFunction::Const { k } | RateFunction::Window { k, .. } | RateFunction::Pulse { k, .. } => k,
        }
    }

    pub fn start(&self) -> f64 {
        match *self {
            RateFunction::Const { .. } => f64::NEG_INFINITY,
            RateFunction::Window { start, .. } => start,
            RateFunction::Pulse { center, width, .. } => center - width / 2.0,
        }
    }

    pub fn end(&self) -> f64 {
        match *self {
            RateFunction::Const { .. } => f64::INFINITY,
            RateFunction::Window { end, .. } => end,
            RateFunction::Pulse { center, width, .. } => center + width / 2.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t >= self.start() && t < self.end() {
            self.k()
        } else {
            0.0
        }
    }

    /// Whether the rate can still be non-zero at some time `>= t`.
    pub fn open_after(&self, t: f64) -> bool {
        self.k() > 0.0 && self.end() > t
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> {
        [self.start(), self.end()].into_iter().filter(|t| t.is_finite())
    }

    pub fn validate(&self) -> Result<(), String> {
        let k = self.k();
        if !(k >= 0.0 && k.is_finite()) {
            return Err(format!("rate {k} must be finite and non-negative"));
        }
        match *self {
            RateFunction::Const { .. } => Ok(()),
            RateFunction::Window { start, end, .. } => {
                if start.is_nan() || end.is_nan() || start >= end || start == f64::INFINITY {
                    Err(format!("window [{start}, {end}] must satisfy start < end"))
                } else {
                    Ok(())
                }
            }
            RateFunction::Pulse { center, width, .. } => {
                if !(center.is_finite() && width.is_finite() && width > 0.0) {
                    Err(format!("pulse at {center} needs a finite positive width, got {width}"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Primary,
    Physiological,
    Drift,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Primary => "primary",
            EdgeKind::Physiological => "physiological",
            EdgeKind::Drift => "drift",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEdge {
    pub source: LabelId,
    pub target: LabelId,
    pub rate: RateFunction,
    pub kind: EdgeKind,
    pub latency: f64,
}

/// Read-only view of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub id: LabelId,
    pub weight: f64,
    pub phantom: bool,
    pub created_at: f64,
}

/// Past weights for latency lookback, sampled at step boundaries.
#[derive(Debug, Clone)]
pub struct History {
    samples: VecDeque<(f64, Vec<f64>)>,
    span: f64,
}

impl History {
    fn new(span: f64) -> Self {
        History { samples: VecDeque::new(), span }
    }

    fn record(&mut self, t: f64, weights: &[f64]) {
        if let Some(last) = self.samples.back_mut() {
            if last.0 == t {
                last.1.clear();
                last.1.extend_from_slice(weights);
                return;
            }
        }
        let buf = if self.samples.len() > 2 && self.samples[1].0 < t - self.span {
            let (_, mut v) = self.samples.pop_front().unwrap_or_default();
            v.clear();
            v.extend_from_slice(weights);
            v
        } else {
            weights.to_vec()
        };
        self.samples.push_back((t, buf));
        while self.samples.len() > 2 && self.samples[1].0 < t - self.span {
            self.samples.pop_front();
        }
    }

    /// Linearly interpolated weight of `id` at time `t`; zero before the
    /// first recorded sample.
    pub fn weight_at(&self, id: LabelId, t: f64) -> f64 {
        let i = self.samples.partition_point(|(ts, _)| *ts <= t);
        if i == 0 {
            return 0.0;
        }
        let (t0, w0) = &self.samples[i - 1];
        match self.samples.get(i) {
            None => w0[id.idx()],
            Some((t1, w1)) => {
                let f = (t - t0) / (t1 - t0);
                w0[id.idx()] + f * (w1[id.idx()] - w0[id.idx()])
            }
        }
    }

    fn keep_only(&mut self, from: LabelId, to: LabelId) {
        for (_, w) in self.samples.iter_mut() {
            let v = w[from.idx()];
            w.iter_mut().for_each(|x| *x = 0.0);
            w[to.idx()] = v;
        }
    }
}

/// The live superposition: one weight per label of the graph, the Rule-1
/// denominator `s`, and per-component presence and phantom flags.
#[derive(Debug, Clone)]
pub struct SystemState {
    weights: Vec<f64>,
    created_at: Vec<f64>,
    present: u64,
    phantom: u64,
    s: f64,
    t: f64,
    history: Option<History>,
}

impl SystemState {
    /// The initial component at weight 1 and `s = 1`.
    pub fn new(graph: &Graph, t0: f64) -> Self {
        let n = graph.len();
        let mut weights = vec![0.0; n];
        let init = graph.initial();
        weights[init.idx()] = 1.0;
        let mut created_at = vec![f64::NAN; n];
        created_at[init.idx()] = t0;
        let history = (graph.max_latency() > 0.0).then(|| {
            let mut h = History::new(graph.max_latency());
            h.record(t0, &weights);
            h
        });
        SystemState {
            weights,
            created_at,
            present: 1 << init.idx(),
            phantom: 0,
            s: 1.0,
            t: t0,
            history,
        }
    }

    /// Builds a state from explicit weights; every id with positive weight is
    /// present. `s` is set to the total weight.
    pub fn from_weights(graph: &Graph, t0: f64, weights: &[(LabelId, f64)]) -> Self {
        let mut state = SystemState::new(graph, t0);
        state.weights.iter_mut().for_each(|w| *w = 0.0);
        state.present = 0;
        for &(id, w) in weights {
            state.weights[id.idx()] = w;
            state.present |= 1 << id.idx();
            state.created_at[id.idx()] = t0;
        }
        state.s = state.weights.iter().sum();
        if let Some(h) = state.history.as_mut() {
            *h = History::new(graph.max_latency());
            h.record(t0, &state.weights);
        }
        state
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn weight(&self, id: LabelId) -> f64 {
        self.weights[id.idx()]
    }

    /// Weights indexed by label id; absent components read as zero.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_present(&self, id: LabelId) -> bool {
        self.present & (1 << id.idx()) != 0
    }

    pub fn is_phantom(&self, id: LabelId) -> bool {
        self.phantom & (1 << id.idx()) != 0
    }

    pub fn present_mask(&self) -> u64 {
        self.present
    }

    pub fn phantom_mask(&self) -> u64 {
        self.phantom
    }

    pub fn present_ids(&self) -> impl Iterator<Item = LabelId> + '_ {
        (0..self.weights.len() as u16)
            .map(LabelId)
            .filter(|id| self.is_present(*id))
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.present_ids().map(|id| Component {
            id,
            weight: self.weights[id.idx()],
            phantom: self.is_phantom(id),
            created_at: self.created_at[id.idx()],
        })
    }

    pub fn history(&self) -> Option<&History> {
        self.history.as_ref()
    }

    /// Source weight seen by an edge at time `t`, honoring its latency.
    pub fn delayed_weight(&self, id: LabelId, latency: f64, t: f64) -> f64 {
        if latency == 0.0 {
            return self.weights[id.idx()];
        }
        let at = t - latency;
        if !(at >= self.created_at[id.idx()]) {
            return 0.0;
        }
        match &self.history {
            Some(h) => h.weight_at(id, at),
            None => 0.0,
        }
    }

    /// Jumps the clock forward without any flow (nothing is live in between).
    pub fn advance_idle(&mut self, t: f64) {
        self.t = t;
        if let Some(h) = self.history.as_mut() {
            h.record(t, &self.weights);
        }
    }

    /// Removes accumulated rounding so the clock lands exactly on a breakpoint.
    pub(crate) fn snap_time(&mut self, t: f64) {
        self.t = t;
        if let Some(h) = self.history.as_mut() {
            if let Some(last) = h.samples.back_mut() {
                last.0 = t;
            }
        }
    }

    /// Creates (at weight zero) every target of an edge that is live on
    /// `[t, t_next)` and whose source is present.
    pub fn activate_targets(&mut self, graph: &Graph, t_next: f64) {
        let mid = 0.5 * (self.t + t_next);
        loop {
            let before = self.present;
            for e in graph.edges() {
                if self.present & (1 << e.source.idx()) != 0
                    && self.present & (1 << e.target.idx()) == 0
                    && e.rate.value(mid) > 0.0
                {
                    self.present |= 1 << e.target.idx();
                    self.created_at[e.target.idx()] = self.t;
                }
            }
            if self.present == before {
                break;
            }
        }
    }

    /// Marks newly phantom components. Phantom status is permanent until the
    /// next reduction clears the state.
    pub fn update_phantoms(&mut self, graph: &Graph) {
        let alive = possibly_active(graph, self, self.t);
        for id in self.present_ids().collect::<Vec<_>>() {
            if !self.is_phantom(id) && phantom_given(graph, self, id, self.t, alive) {
                self.phantom |= 1 << id.idx();
            }
        }
    }

    /// Rule 3: only `promoted` survives, carrying the chosen component's
    /// weight, which becomes the new `s`.
    pub(crate) fn collapse(&mut self, chosen: LabelId, promoted: LabelId) {
        let w = self.weights[chosen.idx()];
        let created = self.created_at[chosen.idx()];
        self.weights.iter_mut().for_each(|x| *x = 0.0);
        self.created_at.iter_mut().for_each(|x| *x = f64::NAN);
        self.weights[promoted.idx()] = w;
        self.created_at[promoted.idx()] = created;
        self.present = 1 << promoted.idx();
        self.phantom = 0;
        self.s = w;
        if let Some(h) = self.history.as_mut() {
            h.keep_only(chosen, promoted);
            h.record(self.t, &self.weights);
        }
    }
}

/// Current along one edge: `rate(t) * w_source(t - latency)`, zero when the
/// source is absent or phantom.
pub fn edge_current(edge: &InteractionEdge, state: &SystemState, t: f64) -> f64 {
    if !state.is_present(edge.source) || state.is_phantom(edge.source) {
        return 0.0;
    }
    let k = edge.rate.value(t);
    if k == 0.0 {
        return 0.0;
    }
    k * state.delayed_weight(edge.source, edge.latency, t)
}

/// Inbound minus outbound current of one component.
pub fn net_current(graph: &Graph, id: LabelId, state: &SystemState, t: f64) -> f64 {
    let inflow: f64 = graph.inbound(id).map(|e| edge_current(e, state, t)).sum();
    let outflow: f64 = graph.outbound(id).map(|e| edge_current(e, state, t)).sum();
    inflow - outflow
}

/// Components that carry weight now or may still receive some through an
/// edge that has not closed.
fn possibly_active(graph: &Graph, state: &SystemState, t: f64) -> u64 {
    let eps = EPS_DEP * state.s;
    let mut active = 0u64;
    for id in state.present_ids() {
        if state.weight(id) > eps {
            active |= 1 << id.idx();
        }
    }
    for e in graph.edges() {
        if e.latency > 0.0
            && e.rate.open_after(t)
            && state.is_present(e.source)
            && state.delayed_weight(e.source, e.latency, t).max(state.delayed_weight(e.source, 0.0, t)) > eps
        {
            active |= 1 << e.source.idx();
        }
    }
    loop {
        let before = active;
        for e in graph.edges() {
            if active & (1 << e.source.idx()) != 0 && e.rate.open_after(t) {
                active |= 1 << e.target.idx();
            }
        }
        if active == before {
            return active;
        }
    }
}

fn phantom_given(graph: &Graph, state: &SystemState, id: LabelId, t: f64, alive: u64) -> bool {
    if !state.is_present(id) || graph.has_conscious(id) {
        return false;
    }
    let fed = graph
        .inbound(id)
        .any(|e| e.rate.open_after(t) && alive & (1 << e.source.idx()) != 0);
    let drains = graph.outbound(id).any(|e| e.rate.open_after(t));
    !fed && !drains
}

/// A component is a phantom when it holds no conscious factor, every inbound
/// edge is permanently dead (closed, or fed by a drained source), and it has
/// no outlet of its own left.
pub fn classify_phantom(graph: &Graph, state: &SystemState, id: LabelId, t: f64) -> bool {
    phantom_given(graph, state, id, t, possibly_active(graph, state, t))
}

/// Bitmask of components that may be chosen: present, not phantom, and for
/// [`TriggerScope::ReadyOnly`] holding a ready factor. Positivity of the net
/// current is checked separately.
pub fn candidate_mask(graph: &Graph, state: &SystemState, scope: TriggerScope) -> u64 {
    let base = state.present & !state.phantom;
    match scope {
        TriggerScope::ReadyOnly => base & graph.ready_mask(),
        TriggerScope::AllPositive => base,
    }
}

/// RK4 integrator with reusable buffers. [`Integrator::propose`] computes the
/// next weights without touching the state; [`Integrator::commit`] applies them.
#[derive(Debug, Clone)]
pub struct Integrator {
    scope: TriggerScope,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    next: Vec<f64>,
    gained: Vec<f64>,
    dt: f64,
}

impl Integrator {
    pub fn new(graph: &Graph, scope: TriggerScope) -> Self {
        let n = graph.len();
        Integrator {
            scope,
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            next: vec![0.0; n],
            gained: vec![0.0; n],
            dt: 0.0,
        }
    }

    fn derivative(graph: &Graph, state: &SystemState, rate_t: f64, t: f64, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let usable = state.present & !state.phantom;
        for e in graph.edges() {
            if usable & (1 << e.source.idx()) == 0 {
                continue;
            }
            let k = e.rate.value(rate_t);
            if k == 0.0 {
                continue;
            }
            let src = if e.latency == 0.0 {
                w[e.source.idx()]
            } else {
                state.delayed_weight(e.source, e.latency, t)
            };
            let j = k * src;
            out[e.source.idx()] -= j;
            out[e.target.idx()] += j;
        }
    }

    /// Largest step the step-control bounds permit from the current state,
    /// assuming rates stay as they are at `t`.
    pub fn max_stable_dt(&mut self, graph: &Graph, state: &SystemState) -> f64 {
        let t = state.t;
        let k1 = &mut self.k[0];
        Self::derivative(graph, state, t, t, &state.weights, k1);
        let (hazard, drain) = Self::bounds(graph, state, self.scope, k1);
        let mut dt = f64::INFINITY;
        if hazard > 0.0 {
            dt = dt.min(MAX_HAZARD_STEP / hazard);
        }
        if drain > 0.0 {
            dt = dt.min(MAX_RELATIVE_DRAIN / drain);
        }
        for e in graph.edges() {
            if e.latency > 0.0 && state.is_present(e.source) && e.rate.open_after(t) {
                dt = dt.min(e.latency);
            }
        }
        dt
    }

    /// (hazard, largest relative drain rate) for a derivative evaluated at the state.
    fn bounds(graph: &Graph, state: &SystemState, scope: TriggerScope, dw: &[f64]) -> (f64, f64) {
        let mask = candidate_mask(graph, state, scope);
        let mut positive = 0.0;
        let mut drain: f64 = 0.0;
        for id in state.present_ids() {
            let d = dw[id.idx()];
            if d > 0.0 && mask & (1 << id.idx()) != 0 {
                positive += d;
            }
            let w = state.weights[id.idx()];
            if d < 0.0 && w > EPS_DEP * state.s {
                drain = drain.max(-d / w);
            }
        }
        (positive / state.s, drain)
    }

    /// Integrates one step of length `dt` from the state's time. Rates are
    /// evaluated at the step midpoint, so `dt` must not cross a breakpoint.
    pub fn propose(&mut self, graph: &Graph, state: &SystemState, dt: f64) -> Result<(), DynamicsError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidStep(dt));
        }
        let t = state.t;
        let rate_t = t + 0.5 * dt;
        let n = state.weights.len();
        let [k1, k2, k3, k4] = &mut self.k;

        Self::derivative(graph, state, rate_t, t, &state.weights, k1);
        let (hazard, drain) = Self::bounds(graph, state, self.scope, k1);
        if hazard * dt > MAX_HAZARD_STEP * (1.0 + 1e-9) {
            return Err(DynamicsError::StepTooLarge {
                dt,
                reason: format!("hazard * dt = {} exceeds {MAX_HAZARD_STEP}", hazard * dt),
            });
        }
        if drain * dt > MAX_RELATIVE_DRAIN * (1.0 + 1e-9) {
            return Err(DynamicsError::StepTooLarge {
                dt,
                reason: format!("relative weight change {} exceeds {MAX_RELATIVE_DRAIN}", drain * dt),
            });
        }
        for e in graph.edges() {
            if e.latency > 0.0 && e.latency < dt * (1.0 - 1e-12) && e.rate.value(rate_t) > 0.0 && state.is_present(e.source) {
                return Err(DynamicsError::StepTooLarge {
                    dt,
                    reason: format!("step exceeds edge latency {}", e.latency),
                });
            }
        }

        for i in 0..n {
            self.stage[i] = state.weights[i] + 0.5 * dt * k1[i];
        }
        Self::derivative(graph, state, rate_t, t + 0.5 * dt, &self.stage, k2);
        for i in 0..n {
            self.stage[i] = state.weights[i] + 0.5 * dt * k2[i];
        }
        Self::derivative(graph, state, rate_t, t + 0.5 * dt, &self.stage, k3);
        for i in 0..n {
            self.stage[i] = state.weights[i] + dt * k3[i];
        }
        Self::derivative(graph, state, rate_t, t + dt, &self.stage, k4);

        let h6 = dt / 6.0;
        for i in 0..n {
            self.next[i] = state.weights[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            self.gained[i] =
                h6 * (k1[i].max(0.0) + 2.0 * k2[i].max(0.0) + 2.0 * k3[i].max(0.0) + k4[i].max(0.0));
        }
        self.dt = dt;
        Ok(())
    }

    /// Weights at the end of the proposed step.
    pub fn proposed(&self) -> &[f64] {
        &self.next
    }

    /// Positive part of each component's net current, integrated over the
    /// proposed step.
    pub fn gained(&self) -> &[f64] {
        &self.gained
    }

    pub fn commit(&self, state: &mut SystemState) {
        state.weights.copy_from_slice(&self.next);
        state.t += self.dt;
        if let Some(h) = state.history.as_mut() {
            h.record(state.t, &state.weights);
        }
    }
}

/// One RK4 step from `state`, returning the advanced state.
pub fn step(graph: &Graph, state: &SystemState, dt: f64, scope: TriggerScope) -> Result<SystemState, DynamicsError> {
    let mut next = state.clone();
    next.activate_targets(graph, state.t + dt);
    let mut integ = Integrator::new(graph, scope);
    integ.propose(graph, &next, dt)?;
    integ.commit(&mut next);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeSpec;
    use crate::model::{canonicalize, BrainFactor, BrainMode, ComponentLabel, DetectorId, FactorState, Names, ObserverId};
    use proptest::prelude::*;

    fn label(remaining: u32, captures: u32, brain: Option<(&str, BrainMode)>) -> ComponentLabel {
        let mut f = vec![
            FactorState::ParticleWave { remaining },
            FactorState::Detector { detector: DetectorId(0), captures: vec![captures] },
        ];
        if let Some((l, m)) = brain {
            f.push(FactorState::Brain(BrainFactor::new(ObserverId(0), l.parse().unwrap(), m).unwrap()));
        }
        canonicalize(f).unwrap()
    }

    fn names() -> Names {
        Names { wave: "psi".into(), detectors: vec!["D".into()], observers: vec!["alice".into()] }
    }

    fn edge(source: &ComponentLabel, target: &ComponentLabel, rate: RateFunction) -> EdgeSpec {
        EdgeSpec { source: source.clone(), target: target.clone(), rate, kind: EdgeKind::Primary, latency: 0.0 }
    }

    /// psi -> D with one edge of the given rate.
    fn drain_graph(rate: RateFunction) -> Graph {
        let a = label(1, 0, None);
        let b = label(0, 1, None);
        Graph::new(names(), a.clone(), vec![edge(&a, &b, rate)]).unwrap()
    }

    fn integrate(graph: &Graph, mut state: SystemState, until: f64, dt: f64) -> SystemState {
        while state.t() < until - 1e-12 {
            let h = dt.min(until - state.t());
            state = step(graph, &state, h, TriggerScope::ReadyOnly).unwrap();
        }
        state
    }

    #[test]
    fn rate_functions_vanish_outside_their_support() {
        let w = RateFunction::Window { k: 0.1, start: 0.0, end: 10.0 };
        assert_eq!(w.value(-0.1), 0.0);
        assert_eq!(w.value(0.0), 0.1);
        assert_eq!(w.value(9.999), 0.1);
        assert_eq!(w.value(10.0), 0.0);
        let p = RateFunction::Pulse { k: 2.0, center: 5.0, width: 1.0 };
        assert_eq!(p.value(4.4), 0.0);
        assert_eq!(p.value(4.5), 2.0);
        assert_eq!(p.value(5.5), 0.0);
        assert_eq!(RateFunction::Const { k: 0.3 }.value(1e9), 0.3);
        assert!(RateFunction::Window { k: 1.0, start: 2.0, end: 2.0 }.validate().is_err());
        assert!(RateFunction::Const { k: -1.0 }.validate().is_err());
        assert!(RateFunction::Pulse { k: 1.0, center: 0.0, width: 0.0 }.validate().is_err());
    }

    #[test]
    fn edge_current_is_rate_times_source_weight() {
        let g = drain_graph(RateFunction::Const { k: 0.1 });
        let s = SystemState::new(&g, 0.0);
        assert!((edge_current(&g.edges()[0], &s, 0.0) - 0.1).abs() < 1e-15);

        let g = drain_graph(RateFunction::Window { k: 0.1, start: 0.0, end: 10.0 });
        let s = SystemState::new(&g, 0.0);
        assert_eq!(edge_current(&g.edges()[0], &s, 11.0), 0.0);
    }

    #[test]
    fn edge_current_looks_back_by_the_latency() {
        let a = label(1, 0, None);
        let b = label(0, 1, None);
        let spec = EdgeSpec {
            latency: 2.0,
            kind: EdgeKind::Physiological,
            ..edge(&a, &b, RateFunction::Const { k: 0.5 })
        };
        let g = Graph::new(names(), a.clone(), vec![spec]).unwrap();
        let ia = g.id_of(&a).unwrap();
        let mut s = SystemState::from_weights(&g, 0.0, &[(ia, 0.4)]);
        s.advance_idle(3.0);
        assert!((edge_current(&g.edges()[0], &s, 3.0) - 0.2).abs() < 1e-15);
        // Before the source existed the lookback sees nothing.
        assert_eq!(edge_current(&g.edges()[0], &s, 1.0), 0.0);
    }

    #[test]
    fn net_current_signs() {
        let a = label(1, 0, None);
        let b = label(0, 1, None);
        let c = label(0, 1, Some(("b1", BrainMode::Ready)));
        let g = Graph::new(
            names(),
            a.clone(),
            vec![
                edge(&a, &b, RateFunction::Const { k: 0.3 }),
                edge(&b, &c, RateFunction::Const { k: 0.3 }),
            ],
        )
        .unwrap();
        let (ia, ib, ic) = (g.id_of(&a).unwrap(), g.id_of(&b).unwrap(), g.id_of(&c).unwrap());
        let s = SystemState::from_weights(&g, 0.0, &[(ia, 0.5), (ib, 0.5), (ic, 0.0)]);
        assert!((net_current(&g, ia, &s, 0.0) + 0.15).abs() < 1e-15);
        assert!((net_current(&g, ib, &s, 0.0) - 0.0).abs() < 1e-15);
        assert!((net_current(&g, ic, &s, 0.0) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn linear_drain_matches_closed_form() {
        let g = drain_graph(RateFunction::Const { k: 0.1 });
        let s = integrate(&g, SystemState::new(&g, 0.0), 10.0, 0.05);
        let a = g.initial();
        let b = g.ids().find(|&i| i != a).unwrap();
        let e = (-1.0f64).exp();
        assert!((s.weight(a) - e).abs() < 1e-6, "{}", s.weight(a));
        assert!((s.weight(b) - (1.0 - e)).abs() < 1e-6);
    }

    #[test]
    fn no_live_edges_only_advances_time() {
        let g = drain_graph(RateFunction::Window { k: 0.1, start: 0.0, end: 1.0 });
        let s0 = SystemState::new(&g, 2.0);
        let s1 = step(&g, &s0, 0.5, TriggerScope::ReadyOnly).unwrap();
        assert_eq!(s1.weights(), s0.weights());
        assert_eq!(s1.t(), 2.5);
    }

    #[test]
    fn late_observer_geometry_conserves_weight() {
        // Two unknown-observer sources feeding two ready targets, plus the capture between the sources.
        let src0 = label(1, 0, Some(("X", BrainMode::Unknown)));
        let src1 = label(0, 1, Some(("X", BrainMode::Unknown)));
        let tgt0 = label(1, 0, Some(("b0", BrainMode::Ready)));
        let tgt1 = label(0, 1, Some(("b1", BrainMode::Ready)));
        let phys = |s: &ComponentLabel, t: &ComponentLabel| EdgeSpec {
            kind: EdgeKind::Physiological,
            ..edge(s, t, RateFunction::Window { k: 2.0, start: 5.0, end: f64::INFINITY })
        };
        let g = Graph::new(
            names(),
            src0.clone(),
            vec![
                edge(&src0, &src1, RateFunction::Window { k: 0.1, start: 0.0, end: 10.0 }),
                phys(&src0, &tgt0),
                phys(&src1, &tgt1),
            ],
        )
        .unwrap();
        let mut s = SystemState::new(&g, 0.0);
        while s.t() < 15.0 - 1e-12 {
            let bound = g.next_breakpoint_after(s.t()).unwrap_or(f64::INFINITY);
            let dt = 0.004f64.min(bound - s.t()).min(15.0 - s.t());
            s = step(&g, &s, dt, TriggerScope::ReadyOnly).unwrap();
            assert!((s.total_weight() - 1.0).abs() <= 1e-9, "sum {} at t {}", s.total_weight(), s.t());
        }
    }

    #[test]
    fn latency_hides_recent_source_changes() {
        let a = label(1, 0, None);
        let b = label(0, 1, None);
        let c = label(0, 1, Some(("U", BrainMode::Unconscious)));
        let delayed = EdgeSpec {
            kind: EdgeKind::Physiological,
            latency: 0.5,
            ..edge(&a, &b, RateFunction::Const { k: 0.5 })
        };
        let plain = Graph::new(names(), a.clone(), vec![delayed.clone()]).unwrap();
        // Same system, but the source also leaks into a third component from t = 2.5.
        let leaky = Graph::new(
            names(),
            a.clone(),
            vec![delayed, edge(&a, &c, RateFunction::Window { k: 1.0, start: 2.5, end: 100.0 })],
        )
        .unwrap();
        let s1 = integrate(&plain, SystemState::new(&plain, 0.0), 3.0, 0.02);
        let s2 = integrate(&leaky, SystemState::new(&leaky, 0.0), 3.0, 0.02);
        let b1 = s1.weight(plain.id_of(&b).unwrap());
        let b2 = s2.weight(leaky.id_of(&b).unwrap());
        assert_eq!(b1, b2);
        assert!(s1.weight(plain.id_of(&a).unwrap()) > s2.weight(leaky.id_of(&a).unwrap()));
    }

    #[test]
    fn oversized_steps_are_rejected() {
        let g = drain_graph(RateFunction::Const { k: 1.0 });
        let s = SystemState::new(&g, 0.0);
        let err = step(&g, &s, 0.1, TriggerScope::ReadyOnly).unwrap_err();
        assert!(matches!(err, DynamicsError::StepTooLarge { .. }));
        assert!(step(&g, &s, 0.05, TriggerScope::ReadyOnly).is_ok());
        assert!(matches!(step(&g, &s, 0.0, TriggerScope::ReadyOnly), Err(DynamicsError::InvalidStep(_))));
    }

    #[test]
    fn hazard_bound_applies_to_ready_targets() {
        let a = label(1, 0, Some(("b0", BrainMode::Conscious)));
        let b = label(0, 1, Some(("b1", BrainMode::Ready)));
        let g = Graph::new(names(), a.clone(), vec![edge(&a, &b, RateFunction::Const { k: 0.5 })]).unwrap();
        let mut s = SystemState::new(&g, 0.0);
        s.activate_targets(&g, 0.1);
        // hazard 0.5: dt 0.05 passes drain control but exceeds hazard * dt = 0.01.
        let mut integ = Integrator::new(&g, TriggerScope::ReadyOnly);
        assert!(integ.propose(&g, &s, 0.05).is_err());
        assert!(integ.propose(&g, &s, 0.02).is_ok());
        assert!((integ.max_stable_dt(&g, &s) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn phantom_needs_dead_inflow_and_no_consciousness() {
        let a = label(1, 0, Some(("b0", BrainMode::Conscious)));
        let b = label(0, 1, Some(("b1", BrainMode::Ready)));
        let g = Graph::new(
            names(),
            a.clone(),
            vec![edge(&a, &b, RateFunction::Window { k: 0.1, start: 0.0, end: 10.0 })],
        )
        .unwrap();
        let (ia, ib) = (g.id_of(&a).unwrap(), g.id_of(&b).unwrap());
        let s = SystemState::from_weights(&g, 0.0, &[(ia, 0.6), (ib, 0.4)]);
        assert!(!classify_phantom(&g, &s, ib, 5.0));
        assert!(classify_phantom(&g, &s, ib, 10.5));
        assert!(!classify_phantom(&g, &s, ia, 10.5));
    }

    #[test]
    fn drained_source_does_not_keep_a_component_alive() {
        let a = label(1, 0, None);
        let b = label(0, 1, Some(("b1", BrainMode::Ready)));
        let g = Graph::new(names(), a.clone(), vec![edge(&a, &b, RateFunction::Const { k: 0.1 })]).unwrap();
        let (ia, ib) = (g.id_of(&a).unwrap(), g.id_of(&b).unwrap());
        let s = SystemState::from_weights(&g, 0.0, &[(ia, 1e-15), (ib, 1.0)]);
        assert!(classify_phantom(&g, &s, ib, 0.0));
        let s = SystemState::from_weights(&g, 0.0, &[(ia, 1e-3), (ib, 1.0)]);
        assert!(!classify_phantom(&g, &s, ib, 0.0));
    }

    proptest! {
        #[test]
        fn single_edge_matches_closed_form(k in 0.0f64..2.0, t_end in 0.1f64..10.0) {
            prop_assume!(k * t_end <= 10.0);
            let g = drain_graph(RateFunction::Const { k });
            let dt = if k > 0.0 { (0.04 / k).min(0.05) } else { 0.05 };
            let s = integrate(&g, SystemState::new(&g, 0.0), t_end, dt);
            let b = g.ids().find(|&i| i != g.initial()).unwrap();
            prop_assert!((s.weight(b) - (1.0 - (-k * t_end).exp())).abs() < 1e-6);
        }

        #[test]
        fn outflow_only_component_never_gains(k1 in 0.0f64..1.0, k2 in 0.0f64..1.0, steps in 1usize..200) {
            let a = label(1, 0, None);
            let b = label(0, 1, None);
            let c = label(0, 1, Some(("b1", BrainMode::Ready)));
            let g = Graph::new(names(), a.clone(), vec![
                edge(&a, &b, RateFunction::Const { k: k1 }),
                edge(&a, &c, RateFunction::Window { k: k2, start: 1.0, end: 3.0 }),
            ]).unwrap();
            let ia = g.id_of(&a).unwrap();
            let mut s = SystemState::new(&g, 0.0);
            for _ in 0..steps {
                let bound = g.next_breakpoint_after(s.t()).unwrap_or(f64::INFINITY);
                let dt = 0.004f64.min(bound - s.t());
                let next = step(&g, &s, dt, TriggerScope::AllPositive).unwrap();
                prop_assert!(next.weight(ia) <= s.weight(ia));
                prop_assert!((next.total_weight() - 1.0).abs() <= 1e-9);
                s = next;
            }
        }
    }
}
