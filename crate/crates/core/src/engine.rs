//! Stochastic hits, reductions and single-trajectory execution.
//!
//! The hit rate is `(sum of positive net currents into eligible components) / s`.
//! The engine integrates that rate exactly over each step (`gained` mass from
//! the RK4 stages) and, treating it as the density of the first hit since the
//! last reduction, draws the hit with conditional probability
//! `dLambda / (1 - Lambda)`. Summed over a step sequence this makes the chance
//! of the first hit landing on a component equal to the weight it gained.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{candidate_mask, net_current, DynamicsError, Integrator, SystemState, EPS_DEP};
use crate::graph::{Graph, LabelId};
use crate::model::{BrainMode, ObserverId};
use crate::scenario::CompiledScenario;

/// Smallest step the engine will take when halving after a step-control failure.
pub const DT_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerScope {
    /// Only components holding a ready brain factor can be chosen.
    #[default]
    ReadyOnly,
    /// Any component with positive net current can be chosen; a hit on one
    /// without ready factors is recorded and has no effect.
    AllPositive,
}

impl TriggerScope {
    pub fn name(self) -> &'static str {
        match self {
            TriggerScope::ReadyOnly => "ready_only",
            TriggerScope::AllPositive => "all_positive",
        }
    }
}

impl fmt::Display for TriggerScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TriggerScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ready_only" => Ok(TriggerScope::ReadyOnly),
            "all_positive" => Ok(TriggerScope::AllPositive),
            other => Err(format!("unknown trigger scope `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("component {0} cannot be reduced: it is absent, a phantom, or has no ready factor")]
    IllegalReduction(String),
    #[error("horizon {horizon} reached with live hazard {hazard}")]
    HorizonExceeded { horizon: f64, hazard: f64 },
    #[error("step size fell below {DT_MIN} at t = {t}")]
    StepUnderflow { t: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Rule 3 applied: the chosen component survives with its ready factors made conscious.
    Reduction,
    /// A hit on a component without ready factors; nothing changes.
    NoOp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionEvent {
    pub t: f64,
    pub kind: EventKind,
    pub chosen: LabelId,
    /// Label of the survivor (the chosen label with ready factors promoted).
    pub survivor: LabelId,
    pub pre_hit_weights: Vec<(LabelId, f64)>,
    pub conscioused: Vec<ObserverId>,
    pub surviving_weight: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub final_state: SystemState,
    pub events: Vec<ReductionEvent>,
    pub outcome_tag: Arc<str>,
    pub terminated_at: f64,
    /// Survivor of the last effective reduction, or the initial label.
    pub experienced: LabelId,
    pub steps: u64,
}

impl TrajectoryOutcome {
    pub fn reductions(&self) -> impl Iterator<Item = &ReductionEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Reduction)
    }
}

/// Per-run random stream: `(master_seed, run_index)` fixes the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub master_seed: u64,
    pub run_index: u64,
}

impl RandomStream {
    pub fn new(master_seed: u64, run_index: u64) -> Self {
        RandomStream { master_seed, run_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.run_index);
        rng
    }
}

/// Observes a trajectory as it runs.
pub trait Probe {
    /// Whether `on_step` needs the instantaneous hazard (costs one current evaluation).
    fn wants_hazard(&self) -> bool {
        false
    }

    /// Called once at the start and after every committed step or reduction.
    fn on_step(&mut self, _graph: &Graph, _state: &SystemState, _hazard: f64) {}

    fn on_event(&mut self, _graph: &Graph, _event: &ReductionEvent, _after: &SystemState) {}
}

pub struct NoProbe;

impl Probe for NoProbe {}

/// Components that could be chosen now, with their positive net currents.
pub fn eligible_set(graph: &Graph, state: &SystemState, t: f64, scope: TriggerScope) -> Vec<(LabelId, f64)> {
    let mask = candidate_mask(graph, state, scope);
    graph
        .ids()
        .filter(|id| mask & (1 << id.idx()) != 0)
        .filter_map(|id| {
            let j = net_current(graph, id, state, t);
            (j > 0.0).then_some((id, j))
        })
        .collect()
}

/// Rule-1 hit rate: sum of eligible positive net currents over `s`.
pub fn hazard(graph: &Graph, state: &SystemState, t: f64, scope: TriggerScope) -> f64 {
    if state.s() <= 0.0 {
        return 0.0;
    }
    eligible_set(graph, state, t, scope).iter().map(|(_, j)| j).sum::<f64>() / state.s()
}

/// Picks an index with probability proportional to its weight; `u` in `[0, 1)`.
fn pick(u: f64, weights: impl Iterator<Item = (LabelId, f64)> + Clone) -> Option<LabelId> {
    let total: f64 = weights.clone().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for (id, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(id);
        if target < acc {
            return Some(id);
        }
    }
    last
}

fn masked<'a>(graph: &Graph, mask: u64, g: &'a [f64]) -> impl Iterator<Item = (LabelId, f64)> + Clone + 'a {
    graph
        .ids()
        .filter(move |id| mask & (1 << id.idx()) != 0)
        .map(move |id| (id, g[id.idx()]))
}

/// Single Bernoulli hit draw over a step: with probability `hazard * dt` a
/// component is picked in proportion to its net current. Always consumes two
/// draws from `rng`.
pub fn sample_hit<R: Rng>(
    graph: &Graph,
    state: &SystemState,
    t: f64,
    dt: f64,
    scope: TriggerScope,
    rng: &mut R,
) -> Option<LabelId> {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let eligible = eligible_set(graph, state, t, scope);
    let h: f64 = eligible.iter().map(|(_, j)| j).sum::<f64>() / state.s();
    if u1 < h * dt {
        pick(u2, eligible.iter().copied())
    } else {
        None
    }
}

/// Rule 3: the chosen component's ready factors become conscious and every
/// other component is dropped. `s` becomes the chosen weight.
pub fn reduce(graph: &Graph, state: &mut SystemState, chosen: LabelId) -> Result<ReductionEvent, EngineError> {
    let legal = state.is_present(chosen) && !state.is_phantom(chosen) && graph.has_ready(chosen);
    let survivor = graph.promoted(chosen).filter(|_| legal);
    let Some(survivor) = survivor else {
        return Err(EngineError::IllegalReduction(graph.display(chosen)));
    };
    let pre_hit_weights: Vec<(LabelId, f64)> = state.present_ids().map(|id| (id, state.weight(id))).collect();
    let conscioused = graph
        .label(chosen)
        .brains()
        .filter(|b| b.mode == BrainMode::Ready)
        .map(|b| b.observer)
        .collect();
    let surviving_weight = state.weight(chosen);
    state.collapse(chosen, survivor);
    Ok(ReductionEvent {
        t: state.t(),
        kind: EventKind::Reduction,
        chosen,
        survivor,
        pre_hit_weights,
        conscioused,
        surviving_weight,
    })
}

/// Whether any edge can move weight right now.
fn any_live(graph: &Graph, state: &SystemState) -> bool {
    let t = state.t();
    let eps = EPS_DEP * state.s();
    graph.edges().iter().any(|e| {
        state.is_present(e.source)
            && !state.is_phantom(e.source)
            && e.rate.value(t) > 0.0
            && (state.weight(e.source) > eps || e.latency > 0.0)
    })
}

/// Earliest future window opening of an edge whose source holds weight.
fn next_opening(graph: &Graph, state: &SystemState) -> Option<f64> {
    let t = state.t();
    let eps = EPS_DEP * state.s();
    graph
        .edges()
        .iter()
        .filter(|e| {
            state.is_present(e.source)
                && !state.is_phantom(e.source)
                && e.rate.k() > 0.0
                && e.rate.start() > t
                && state.weight(e.source) > eps
        })
        .map(|e| e.rate.start())
        .min_by(f64::total_cmp)
}

/// True once every component where `observer` is conscious has drained and
/// the observer survives only in unconscious states.
fn has_exited(graph: &Graph, state: &SystemState, observer: ObserverId) -> bool {
    let eps = EPS_DEP * state.s();
    let mut unconscious = false;
    for id in state.present_ids() {
        match graph.label(id).brain(observer).map(|b| b.mode) {
            Some(BrainMode::Conscious) if state.weight(id) > eps => return false,
            Some(BrainMode::Unconscious) if state.weight(id) > eps => unconscious = true,
            _ => {}
        }
    }
    unconscious
}

pub fn run_trajectory(scenario: &CompiledScenario, stream: RandomStream) -> Result<TrajectoryOutcome, EngineError> {
    run_trajectory_with(scenario, stream, &mut NoProbe)
}

pub fn run_trajectory_with(
    scenario: &CompiledScenario,
    stream: RandomStream,
    probe: &mut dyn Probe,
) -> Result<TrajectoryOutcome, EngineError> {
    let graph = scenario.graph();
    let run = scenario.run_config();
    let scope = run.scope;
    let horizon = run.horizon;
    let mut rng = stream.rng();
    let mut state = SystemState::new(graph, 0.0);
    let mut integ = Integrator::new(graph, scope);
    let mut full_gain = vec![0.0; graph.len()];
    let mut lambda = 0.0;
    let mut experienced = graph.initial();
    let mut events = Vec::new();
    let mut steps = 0u64;
    let mut exit = false;

    let report = |probe: &mut dyn Probe, state: &SystemState| {
        let h = if probe.wants_hazard() { hazard(graph, state, state.t(), scope) } else { 0.0 };
        probe.on_step(graph, state, h);
    };
    report(probe, &state);

    loop {
        let t = state.t();
        if t >= horizon {
            let h = hazard(graph, &state, t, scope);
            if h > 0.0 {
                return Err(EngineError::HorizonExceeded { horizon, hazard: h });
            }
            break;
        }
        state.update_phantoms(graph);
        if scenario.exit_observers().iter().any(|&o| has_exited(graph, &state, o)) {
            exit = true;
            break;
        }
        if !any_live(graph, &state) {
            match next_opening(graph, &state) {
                Some(start) if start < horizon => {
                    state.advance_idle(start);
                    continue;
                }
                _ => break,
            }
        }

        let bound = graph.next_breakpoint_after(t).unwrap_or(f64::INFINITY).min(horizon);
        let mut dt = run.dt.min(bound - t);
        if bound - (t + dt) < 1e-9 * bound.abs().max(1.0) {
            dt = bound - t;
        }
        state.activate_targets(graph, t + dt);
        let stable = integ.max_stable_dt(graph, &state);
        if stable < dt {
            dt = stable;
        }
        loop {
            match integ.propose(graph, &state, dt) {
                Ok(()) => break,
                Err(DynamicsError::StepTooLarge { .. }) => {
                    dt *= 0.5;
                    if dt < DT_MIN {
                        return Err(EngineError::StepUnderflow { t });
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        steps += 1;

        let mask = candidate_mask(graph, &state, scope);
        let d_lambda = masked(graph, mask, integ.gained()).map(|(_, g)| g).sum::<f64>() / state.s();
        let p = if d_lambda <= 0.0 {
            0.0
        } else if lambda >= 1.0 {
            1.0
        } else {
            (d_lambda / (1.0 - lambda)).min(1.0)
        };
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();

        if u1 >= p {
            integ.commit(&mut state);
            if (state.t() - bound).abs() < 1e-9 * bound.abs().max(1.0) {
                state.snap_time(bound);
            }
            lambda += d_lambda;
            report(probe, &state);
            continue;
        }

        // Hit inside this step: rewind to the fraction u1 / p of it.
        full_gain.copy_from_slice(integ.gained());
        let partial = dt * (u1 / p);
        let mut chosen = None;
        if partial > 0.0 && integ.propose(graph, &state, partial).is_ok() {
            chosen = pick(u2, masked(graph, mask, integ.gained()));
            integ.commit(&mut state);
            lambda += masked(graph, mask, integ.gained()).map(|(_, g)| g).sum::<f64>() / state.s();
        }
        let chosen = match chosen.or_else(|| pick(u2, masked(graph, mask, &full_gain))) {
            Some(c) => c,
            None => continue,
        };
        if graph.has_ready(chosen) {
            let event = reduce(graph, &mut state, chosen)?;
            experienced = event.survivor;
            lambda = 0.0;
            probe.on_event(graph, &event, &state);
            events.push(event);
        } else {
            let event = ReductionEvent {
                t: state.t(),
                kind: EventKind::NoOp,
                chosen,
                survivor: chosen,
                pre_hit_weights: state.present_ids().map(|id| (id, state.weight(id))).collect(),
                conscioused: Vec::new(),
                surviving_weight: state.weight(chosen),
            };
            probe.on_event(graph, &event, &state);
            events.push(event);
        }
        report(probe, &state);
    }

    let outcome_tag = if exit {
        scenario.exit_tag(experienced)
    } else {
        scenario.tag(experienced)
    };
    Ok(TrajectoryOutcome {
        terminated_at: state.t(),
        final_state: state,
        events,
        outcome_tag,
        experienced,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, ScenarioKind, ScenarioParams};
    use crate::dynamics::{EdgeKind, RateFunction};
    use crate::graph::EdgeSpec;
    use crate::model::{canonicalize, BrainFactor, BrainLabel, ComponentLabel, DetectorId, FactorState, Names};
    use rand::RngCore;

    /// Yields a fixed 64-bit word forever.
    struct Fixed(u64);

    impl RngCore for Fixed {
        fn next_u32(&mut self) -> u32 {
            (self.0 >> 32) as u32
        }
        fn next_u64(&mut self) -> u64 {
            self.0
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            dest.fill(0)
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
            dest.fill(0);
            Ok(())
        }
    }

    fn label(captures: u32, mode: BrainMode) -> ComponentLabel {
        canonicalize([
            FactorState::ParticleWave { remaining: 1 - captures },
            FactorState::Detector { detector: DetectorId(0), captures: vec![captures] },
            FactorState::Brain(BrainFactor::new(ObserverId(0), BrainLabel::percept(captures), mode).unwrap()),
        ])
        .unwrap()
    }

    fn one_edge(k: f64) -> (Graph, LabelId, LabelId) {
        let a = label(0, BrainMode::Conscious);
        let b = label(1, BrainMode::Ready);
        let names = Names { wave: "psi".into(), detectors: vec!["D".into()], observers: vec!["alice".into()] };
        let g = Graph::new(
            names,
            a.clone(),
            vec![EdgeSpec { source: a.clone(), target: b.clone(), rate: RateFunction::Const { k }, kind: EdgeKind::Primary, latency: 0.0 }],
        )
        .unwrap();
        let (ia, ib) = (g.id_of(&a).unwrap(), g.id_of(&b).unwrap());
        (g, ia, ib)
    }

    fn present(graph: &Graph, state: &mut SystemState) {
        state.activate_targets(graph, state.t() + 1e-3);
    }

    #[test]
    fn eligibility_depends_on_scope() {
        let bare = build(ScenarioKind::Bare, &ScenarioParams::default()).unwrap();
        let g = bare.graph();
        let mut s = SystemState::new(g, 0.0);
        present(g, &mut s);
        assert!(eligible_set(g, &s, 0.0, TriggerScope::ReadyOnly).is_empty());
        let all = eligible_set(g, &s, 0.0, TriggerScope::AllPositive);
        assert_eq!(all.len(), 1);
        assert_eq!(g.label(all[0].0).total_captures(), 1);

        let cont = build(ScenarioKind::ContinuousObserver, &ScenarioParams::default()).unwrap();
        let g = cont.graph();
        let mut s = SystemState::new(g, 0.0);
        present(g, &mut s);
        let e = eligible_set(g, &s, 0.0, TriggerScope::ReadyOnly);
        assert_eq!(e.len(), 1);
        assert!(g.has_ready(e[0].0));
        assert!((e[0].1 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hazard_divides_by_s() {
        let (g, ia, ib) = one_edge(0.2);
        let mut s = SystemState::from_weights(&g, 0.0, &[(ia, 1.0), (ib, 0.0)]);
        present(&g, &mut s);
        assert!((hazard(&g, &s, 0.0, TriggerScope::ReadyOnly) - 0.2).abs() < 1e-15);

        let (g, ia, ib) = one_edge(0.4);
        let s = SystemState::from_weights(&g, 0.0, &[(ia, 0.5), (ib, 0.0)]);
        assert_eq!(s.s(), 0.5);
        assert!((hazard(&g, &s, 0.0, TriggerScope::ReadyOnly) - 0.4).abs() < 1e-15);

        let s = SystemState::from_weights(&g, 0.0, &[(ib, 0.5)]);
        assert_eq!(hazard(&g, &s, 0.0, TriggerScope::ReadyOnly), 0.0);
    }

    #[test]
    fn sample_hit_forced_branches() {
        let (g, ia, ib) = one_edge(0.2);
        let s = SystemState::from_weights(&g, 0.0, &[(ia, 1.0), (ib, 0.0)]);
        assert_eq!(sample_hit(&g, &s, 0.0, 0.01, TriggerScope::ReadyOnly, &mut Fixed(0)), Some(ib));
        assert_eq!(sample_hit(&g, &s, 0.0, 0.01, TriggerScope::ReadyOnly, &mut Fixed(u64::MAX)), None);
        let quiet = SystemState::from_weights(&g, 0.0, &[(ib, 1.0)]);
        assert_eq!(sample_hit(&g, &quiet, 0.0, 0.01, TriggerScope::ReadyOnly, &mut Fixed(0)), None);
    }

    #[test]
    fn selection_follows_current_ratio() {
        // Source feeding two ready components at 0.3 and 0.1.
        let a = label(0, BrainMode::Conscious);
        let b = label(1, BrainMode::Ready);
        let c = canonicalize([
            FactorState::ParticleWave { remaining: 0 },
            FactorState::Detector { detector: DetectorId(0), captures: vec![1] },
            FactorState::Brain(BrainFactor::new(ObserverId(0), BrainLabel::Percept { seen: 1, site: 1 }, BrainMode::Ready).unwrap()),
        ])
        .unwrap();
        let names = Names { wave: "psi".into(), detectors: vec!["D".into()], observers: vec!["alice".into()] };
        let edge = |t: &ComponentLabel, k| EdgeSpec {
            source: a.clone(),
            target: t.clone(),
            rate: RateFunction::Const { k },
            kind: EdgeKind::Primary,
            latency: 0.0,
        };
        let g = Graph::new(names, a.clone(), vec![edge(&b, 0.3), edge(&c, 0.1)]).unwrap();
        let mut s = SystemState::new(&g, 0.0);
        present(&g, &mut s);
        let ib = g.id_of(&b).unwrap();
        let mut rng = RandomStream::new(11, 0).rng();
        let n = 100_000u32;
        let mut hits_b = 0u32;
        for _ in 0..n {
            // dt large enough that every draw hits.
            match sample_hit(&g, &s, 0.0, 10.0, TriggerScope::ReadyOnly, &mut rng) {
                Some(id) if id == ib => hits_b += 1,
                Some(_) => {}
                None => panic!("forced hit missed"),
            }
        }
        let mean = 0.75 * n as f64;
        let sigma = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((hits_b as f64 - mean).abs() <= 3.0 * sigma, "{hits_b} vs {mean}");
    }

    #[test]
    fn reduce_keeps_only_the_chosen_component() {
        let cont = build(ScenarioKind::ContinuousObserver, &ScenarioParams::default()).unwrap();
        let g = cont.graph();
        let mut s = SystemState::new(g, 0.0);
        present(g, &mut s);
        let d1 = eligible_set(g, &s, 0.0, TriggerScope::ReadyOnly)[0].0;
        let mut s = crate::dynamics::step(g, &s, 0.05, TriggerScope::ReadyOnly).unwrap();
        let w = s.weight(d1);
        let event = reduce(g, &mut s, d1).unwrap();
        let survivor = event.survivor;
        assert_eq!(s.present_ids().collect::<Vec<_>>(), vec![survivor]);
        assert_eq!(s.s(), w);
        assert_eq!(event.surviving_weight, w);
        assert_eq!(event.conscioused, vec![ObserverId(0)]);
        assert!(g.label(survivor).brains().all(|b| b.mode == BrainMode::Conscious));
        assert_eq!(g.label(survivor).total_captures(), 1);
        assert!(matches!(reduce(g, &mut s, survivor), Err(EngineError::IllegalReduction(_))));
    }

    #[test]
    fn joint_hit_makes_both_observers_conscious() {
        let co = build(ScenarioKind::CoObserver, &ScenarioParams::default()).unwrap();
        let g = co.graph();
        let mut s = SystemState::new(g, 0.0);
        present(g, &mut s);
        let area1 = g
            .ids()
            .find(|&id| g.label(id).captures(DetectorId(0)) == Some(&[1, 0][..]) && g.has_ready(id))
            .unwrap();
        let s1 = crate::dynamics::step(g, &s, 0.05, TriggerScope::ReadyOnly).unwrap();
        let mut s1 = s1;
        let e = reduce(g, &mut s1, area1).unwrap();
        assert_eq!(e.conscioused, vec![ObserverId(0), ObserverId(1)]);
        let l = g.label(e.survivor);
        assert_eq!(l.brains().filter(|b| b.mode == BrainMode::Conscious).count(), 2);
    }

    #[test]
    fn terminal_observer_gets_exactly_one_reduction() {
        let sc = build(ScenarioKind::TerminalObserver, &ScenarioParams::default()).unwrap();
        for i in 0..300 {
            let out = run_trajectory(&sc, RandomStream::new(3, i)).unwrap();
            assert_eq!(out.reductions().count(), 1, "run {i}");
            assert!(out.events[0].t >= 12.0);
        }
    }

    #[test]
    fn bare_wave_never_reduces() {
        let sc = build(ScenarioKind::Bare, &ScenarioParams::default()).unwrap();
        for i in 0..50 {
            let out = run_trajectory(&sc, RandomStream::new(5, i)).unwrap();
            assert!(out.events.is_empty());
            assert_eq!(&*out.outcome_tag, "superposition-persists");
            assert_eq!(out.final_state.present_ids().count(), 2);
            let e = (-1.0f64).exp();
            assert!((out.final_state.weight(sc.graph().initial()) - e).abs() < 1e-6);
        }
    }

    #[test]
    fn all_positive_hits_on_bare_wave_are_no_ops() {
        let mut p = ScenarioParams::default();
        p.scope = TriggerScope::AllPositive;
        let sc = build(ScenarioKind::Bare, &p).unwrap();
        let mut noops = 0;
        for i in 0..200 {
            let out = run_trajectory(&sc, RandomStream::new(5, i)).unwrap();
            assert_eq!(out.reductions().count(), 0);
            noops += out.events.iter().filter(|e| e.kind == EventKind::NoOp).count();
            assert_eq!(&*out.outcome_tag, "superposition-persists");
        }
        assert!(noops > 0);
    }

    #[test]
    fn same_stream_same_trajectory() {
        let sc = build(ScenarioKind::Drift, &ScenarioParams::for_kind(ScenarioKind::Drift)).unwrap();
        for i in 0..20 {
            let a = run_trajectory(&sc, RandomStream::new(99, i)).unwrap();
            let b = run_trajectory(&sc, RandomStream::new(99, i)).unwrap();
            assert_eq!(a.events, b.events);
            assert_eq!(a.final_state.weights(), b.final_state.weights());
            assert_eq!(a.outcome_tag, b.outcome_tag);
            assert_eq!(a.terminated_at.to_bits(), b.terminated_at.to_bits());
        }
    }
}
