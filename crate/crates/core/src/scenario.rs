//! Scenario descriptions and their compilation into a [`Graph`].
//!
//! A scenario names one particle wave, its detectors and observers, and the
//! couplings between them. Compilation starts from the initial component and
//! generates every component the couplings can reach, keeping only edges
//! that can still carry current by the time their source can exist.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::ScenarioKind;
use crate::dynamics::{EdgeKind, RateFunction};
use crate::engine::TriggerScope;
use crate::graph::{EdgeSpec, Graph, GraphError, LabelId, MAX_COMPONENTS};
use crate::model::{
    canonicalize, rule2_target_mode, rule4_allows, BrainFactor, BrainLabel, BrainMode, ComponentLabel, DetectorId,
    FactorState, ModelError, Names, ObserverId,
};

/// Largest drift neighborhood accepted.
pub const MAX_NEIGHBORS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("forbidden transition {source_label} -> {target_label}: both carry a ready state of the same observer")]
    ForbiddenEdge { source_label: String, target_label: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveDecl {
    pub name: String,
    pub particles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorDecl {
    pub name: String,
    pub areas: u32,
}

/// Particle wave feeding one scintillation area (1-based) of a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryCoupling {
    pub detector: DetectorId,
    pub area: u32,
    pub rate: RateFunction,
}

/// An observer turning to a detector area at time `at`. Before then the
/// observer is in the unknown state; at `at <= 0` the observer starts
/// conscious of the detector's initial reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub observer: ObserverId,
    pub detector: DetectorId,
    pub area: u32,
    pub at: f64,
    /// Physiological rate from the unknown state to the percept.
    pub rate: f64,
    pub latency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftInto {
    /// Neighboring percepts of the same reading, created ready.
    Ready,
    /// The unconscious state.
    Unconscious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCoupling {
    pub observer: ObserverId,
    pub rate: f64,
    pub neighbors: u32,
    pub window: (f64, f64),
    pub into: DriftInto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomEdge {
    pub kind: EdgeKind,
    pub source: ComponentLabel,
    pub target: ComponentLabel,
    pub rate: RateFunction,
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub runs: u64,
    /// Largest integration step.
    pub dt: f64,
    pub horizon: f64,
    pub scope: TriggerScope,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            runs: 10_000,
            dt: 0.05,
            horizon: 40.0,
            scope: TriggerScope::ReadyOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDef {
    pub kind: Option<ScenarioKind>,
    pub wave: WaveDecl,
    pub detectors: Vec<DetectorDecl>,
    pub observers: Vec<String>,
    pub primaries: Vec<PrimaryCoupling>,
    pub observations: Vec<Observation>,
    pub drifts: Vec<DriftCoupling>,
    pub custom_edges: Vec<CustomEdge>,
    pub run: RunConfig,
}

impl ScenarioDef {
    pub fn names(&self) -> Names {
        Names {
            wave: self.wave.name.clone(),
            detectors: self.detectors.iter().map(|d| d.name.clone()).collect(),
            observers: self.observers.clone(),
        }
    }

    pub fn observation(&self, observer: ObserverId) -> Option<&Observation> {
        self.observations.iter().find(|o| o.observer == observer)
    }

    /// The component every run starts from.
    pub fn initial_label(&self) -> Result<ComponentLabel, ScenarioError> {
        let mut factors = vec![FactorState::ParticleWave { remaining: self.wave.particles }];
        for (i, d) in self.detectors.iter().enumerate() {
            factors.push(FactorState::Detector {
                detector: DetectorId(i as u16),
                captures: vec![0; d.areas as usize],
            });
        }
        for i in 0..self.observers.len() {
            let observer = ObserverId(i as u16);
            let factor = match self.observation(observer) {
                Some(o) if o.at <= 0.0 => {
                    BrainFactor::new(observer, BrainLabel::percept(0), BrainMode::Conscious)?
                }
                _ => BrainFactor::new(observer, BrainLabel::Unknown, BrainMode::Unknown)?,
            };
            factors.push(FactorState::Brain(factor));
        }
        Ok(canonicalize(factors)?)
    }

    fn invalid(msg: impl Into<String>) -> ScenarioError {
        ScenarioError::Invalid(msg.into())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut names: Vec<&str> = vec![&self.wave.name];
        names.extend(self.detectors.iter().map(|d| d.name.as_str()));
        names.extend(self.observers.iter().map(String::as_str));
        let mut sorted = names.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Self::invalid(format!("name `{}` is declared twice", w[0])));
        }
        if self.wave.particles == 0 {
            return Err(Self::invalid("a wave needs at least one particle"));
        }
        for d in &self.detectors {
            if d.areas == 0 || d.areas > 8 {
                return Err(Self::invalid(format!("detector {} must have 1 to 8 areas, got {}", d.name, d.areas)));
            }
        }
        let area_ok = |det: DetectorId, area: u32| -> Result<(), ScenarioError> {
            let d = self
                .detectors
                .get(det.0 as usize)
                .ok_or_else(|| Self::invalid(format!("unknown detector id {}", det.0)))?;
            if area == 0 || area > d.areas {
                return Err(ScenarioError::DimensionMismatch(format!(
                    "detector {} has {} area(s), area {area} referenced",
                    d.name, d.areas
                )));
            }
            Ok(())
        };
        let observer_ok = |o: ObserverId| -> Result<(), ScenarioError> {
            if (o.0 as usize) < self.observers.len() {
                Ok(())
            } else {
                Err(Self::invalid(format!("unknown observer id {}", o.0)))
            }
        };
        let rate_ok = |what: &str, k: f64| -> Result<(), ScenarioError> {
            if k >= 0.0 && k.is_finite() {
                Ok(())
            } else {
                Err(Self::invalid(format!("{what} rate must be finite and non-negative, got {k}")))
            }
        };

        for p in &self.primaries {
            area_ok(p.detector, p.area)?;
            p.rate.validate().map_err(Self::invalid)?;
        }
        for (i, o) in self.observations.iter().enumerate() {
            observer_ok(o.observer)?;
            area_ok(o.detector, o.area)?;
            let name = &self.observers[o.observer.0 as usize];
            if self.observations[..i].iter().any(|p| p.observer == o.observer) {
                return Err(Self::invalid(format!("observer {name} observes twice")));
            }
            if !(o.at.is_finite() && o.at >= 0.0 && o.at < self.run.horizon) {
                return Err(Self::invalid(format!(
                    "observation time {} of {name} must lie in [0, horizon {})",
                    o.at, self.run.horizon
                )));
            }
            rate_ok("physiological", o.rate)?;
            if !(o.latency.is_finite() && o.latency >= 0.0) {
                return Err(Self::invalid(format!("latency {} must be finite and non-negative", o.latency)));
            }
            // A delayed linear drain overshoots below zero once k * latency exceeds 1/e.
            if o.rate * o.latency > (-1.0f64).exp() {
                return Err(Self::invalid(format!(
                    "physiological rate {} with latency {} would drive weights negative (rate * latency must not exceed 1/e)",
                    o.rate, o.latency
                )));
            }
        }
        for (i, d) in self.drifts.iter().enumerate() {
            observer_ok(d.observer)?;
            let name = &self.observers[d.observer.0 as usize];
            if self.drifts[..i].iter().any(|p| p.observer == d.observer) {
                return Err(Self::invalid(format!("observer {name} drifts twice")));
            }
            rate_ok("drift", d.rate)?;
            if d.neighbors == 0 || d.neighbors > MAX_NEIGHBORS {
                return Err(Self::invalid(format!(
                    "drift neighbors must be between 1 and {MAX_NEIGHBORS}, got {}",
                    d.neighbors
                )));
            }
            RateFunction::Window { k: d.rate, start: d.window.0, end: d.window.1 }
                .validate()
                .map_err(Self::invalid)?;
        }
        for e in &self.custom_edges {
            self.check_label(&e.source)?;
            self.check_label(&e.target)?;
            e.rate.validate().map_err(Self::invalid)?;
            if e.target.brains().any(|b| b.mode == BrainMode::Conscious && e.source.brain(b.observer) != Some(b)) {
                let names = self.names();
                return Err(Self::invalid(format!(
                    "{} -> {} creates a conscious state; only a reduction may",
                    e.source.display(&names),
                    e.target.display(&names)
                )));
            }
            if !rule4_allows(&e.source, &e.target) {
                let names = self.names();
                return Err(ScenarioError::ForbiddenEdge {
                    source_label: e.source.display(&names).to_string(),
                    target_label: e.target.display(&names).to_string(),
                });
            }
            if e.latency != 0.0 && e.kind != EdgeKind::Physiological {
                return Err(Self::invalid("latency is only allowed on physiological interactions"));
            }
            if !(e.latency.is_finite() && e.latency >= 0.0) {
                return Err(Self::invalid(format!("latency {} must be finite and non-negative", e.latency)));
            }
        }
        if !(self.run.dt > 0.0 && self.run.dt.is_finite()) {
            return Err(Self::invalid(format!("dt must be positive, got {}", self.run.dt)));
        }
        if !(self.run.horizon > 0.0 && self.run.horizon.is_finite()) {
            return Err(Self::invalid(format!("horizon must be positive, got {}", self.run.horizon)));
        }
        if self.run.runs == 0 {
            return Err(Self::invalid("runs must be at least 1"));
        }
        Ok(())
    }

    /// A label used in a custom edge must match the declared dimensions.
    pub fn check_label(&self, label: &ComponentLabel) -> Result<(), ScenarioError> {
        let names = self.names();
        let shown = || label.display(&names).to_string();
        let remaining = label
            .wave_remaining()
            .ok_or_else(|| ScenarioError::DimensionMismatch(format!("{} has no wave factor", shown())))?;
        let mut detectors = 0;
        for f in label.factors() {
            match f {
                FactorState::Detector { detector, captures } => {
                    detectors += 1;
                    let decl = self.detectors.get(detector.0 as usize).ok_or_else(|| {
                        ScenarioError::DimensionMismatch(format!("{} names an undeclared detector", shown()))
                    })?;
                    if captures.len() != decl.areas as usize {
                        return Err(ScenarioError::DimensionMismatch(format!(
                            "detector {} has {} area(s) but {} gives {} capture count(s)",
                            decl.name,
                            decl.areas,
                            shown(),
                            captures.len()
                        )));
                    }
                }
                FactorState::Brain(b) => {
                    if b.observer.0 as usize >= self.observers.len() {
                        return Err(ScenarioError::DimensionMismatch(format!(
                            "{} names an undeclared observer",
                            shown()
                        )));
                    }
                }
                FactorState::ParticleWave { .. } => {}
            }
        }
        if detectors != self.detectors.len() {
            return Err(ScenarioError::DimensionMismatch(format!(
                "{} must give a state for every detector",
                shown()
            )));
        }
        if label.brains().count() != self.observers.len() {
            return Err(ScenarioError::DimensionMismatch(format!(
                "{} must give a state for every observer",
                shown()
            )));
        }
        if remaining + label.total_captures() != self.wave.particles {
            return Err(ScenarioError::DimensionMismatch(format!(
                "{}: remaining particles plus captures must equal {}",
                shown(),
                self.wave.particles
            )));
        }
        Ok(())
    }

    /// Edges leaving `label` generated by the couplings, before the
    /// ready-state transition filter.
    fn generate(&self, label: &ComponentLabel) -> Vec<EdgeSpec> {
        let mut out = Vec::new();
        let engaged: HashMap<ObserverId, &Observation> =
            self.observations.iter().map(|o| (o.observer, o)).collect();

        for p in &self.primaries {
            let (Some(remaining), Some(captures)) = (label.wave_remaining(), label.captures(p.detector)) else {
                continue;
            };
            if remaining == 0 {
                continue;
            }
            let mut captures = captures.to_vec();
            captures[p.area as usize - 1] += 1;
            let target = label.map_factors(|f| match f {
                FactorState::ParticleWave { remaining } => FactorState::ParticleWave { remaining: remaining - 1 },
                FactorState::Detector { detector, .. } if *detector == p.detector => FactorState::Detector {
                    detector: *detector,
                    captures: captures.clone(),
                },
                FactorState::Brain(b) => match (b.label, engaged.get(&b.observer)) {
                    (BrainLabel::Percept { site, .. }, Some(o)) if o.detector == p.detector => {
                        let label = BrainLabel::Percept { seen: captures[o.area as usize - 1], site };
                        // The observed detector changed, so this is a new entanglement.
                        FactorState::Brain(BrainFactor {
                            mode: rule2_target_mode(None, &label),
                            label,
                            ..*b
                        })
                    }
                    _ => f.clone(),
                },
                other => other.clone(),
            });
            out.push(EdgeSpec {
                source: label.clone(),
                target,
                rate: p.rate,
                kind: EdgeKind::Primary,
                latency: 0.0,
            });
        }

        for o in &self.observations {
            let (Some(b), Some(captures)) = (label.brain(o.observer), label.captures(o.detector)) else {
                continue;
            };
            if b.label != BrainLabel::Unknown {
                continue;
            }
            let seen = BrainLabel::percept(captures[o.area as usize - 1]);
            let mode = rule2_target_mode(Some(b), &seen);
            let target = label.map_factors(|f| match f {
                FactorState::Brain(x) if x.observer == o.observer => FactorState::Brain(BrainFactor {
                    label: seen,
                    mode,
                    ..*x
                }),
                other => other.clone(),
            });
            out.push(EdgeSpec {
                source: label.clone(),
                target,
                rate: RateFunction::Window { k: o.rate, start: o.at, end: f64::INFINITY },
                kind: EdgeKind::Physiological,
                latency: o.latency,
            });
        }

        for d in &self.drifts {
            let Some(b) = label.brain(d.observer) else { continue };
            let BrainLabel::Percept { seen, site } = b.label else { continue };
            if b.mode != BrainMode::Conscious {
                continue;
            }
            let targets: Vec<BrainLabel> = match d.into {
                DriftInto::Ready => (0..=d.neighbors as u8)
                    .filter(|&j| j != site)
                    .map(|j| BrainLabel::Percept { seen, site: j })
                    .collect(),
                DriftInto::Unconscious => vec![BrainLabel::Unconscious],
            };
            for new in targets {
                let mode = rule2_target_mode(Some(b), &new);
                let target = label.map_factors(|f| match f {
                    FactorState::Brain(x) if x.observer == d.observer => FactorState::Brain(BrainFactor {
                        label: new,
                        mode,
                        ..*x
                    }),
                    other => other.clone(),
                });
                out.push(EdgeSpec {
                    source: label.clone(),
                    target,
                    rate: RateFunction::Window { k: d.rate, start: d.window.0, end: d.window.1 },
                    kind: EdgeKind::Drift,
                    latency: 0.0,
                });
            }
        }

        for e in &self.custom_edges {
            if e.source == *label {
                out.push(EdgeSpec {
                    source: e.source.clone(),
                    target: e.target.clone(),
                    rate: e.rate,
                    kind: e.kind,
                    latency: e.latency,
                });
            }
        }

        // Active factors of observers whose detector changed become ready, which
        // can put an observer in the ready state on both sides.
        out.retain(|e| rule4_allows(&e.source, &e.target));
        out
    }

    /// Validates the scenario and builds its component graph.
    pub fn compile(&self) -> Result<CompiledScenario, ScenarioError> {
        self.validate()?;
        let initial = self.initial_label()?;

        // Earliest time at which each label can hold weight. An edge is kept
        // only if its window is still open at that time.
        let mut earliest: BTreeMap<ComponentLabel, f64> = BTreeMap::new();
        let mut edges: BTreeMap<(ComponentLabel, ComponentLabel, EdgeKind, u64, u64), EdgeSpec> = BTreeMap::new();
        let mut queue = VecDeque::new();
        earliest.insert(initial.clone(), 0.0);
        queue.push_back(initial.clone());
        let mut visits = 0usize;

        while let Some(label) = queue.pop_front() {
            visits += 1;
            if earliest.len() > MAX_COMPONENTS || visits > 64 * MAX_COMPONENTS {
                return Err(GraphError::TooManyComponents(earliest.len()).into());
            }
            let t0 = earliest[&label];
            for e in self.generate(&label) {
                if e.rate.end() <= t0 {
                    continue;
                }
                let arrive = (t0 + e.latency).max(e.rate.start());
                let key = (e.source.clone(), e.target.clone(), e.kind, e.rate.start().to_bits(), e.rate.end().to_bits());
                let target = e.target.clone();
                edges.entry(key).or_insert(e);
                offer(&mut earliest, &mut queue, target, arrive);
            }
            if label.has_mode(BrainMode::Ready) {
                offer(&mut earliest, &mut queue, label.promote_ready(), t0);
            }
        }

        let names = self.names();
        let graph = Graph::new(names, initial, edges.into_values().collect())?;
        let tags = graph.ids().map(|id| Arc::from(self.outcome_tag(graph.label(id)))).collect();
        let exit_observers = self
            .drifts
            .iter()
            .filter(|d| d.into == DriftInto::Unconscious)
            .map(|d| d.observer)
            .collect();
        Ok(CompiledScenario {
            def: self.clone(),
            graph,
            tags,
            exit_observers,
        })
    }

    /// Outcome name for the component a run ends up experiencing.
    pub fn outcome_tag(&self, label: &ComponentLabel) -> String {
        if !label.has_mode(BrainMode::Conscious) {
            return "superposition-persists".into();
        }
        if label.total_captures() == 0 {
            return "no-capture".into();
        }
        let counts: Vec<u32> = label
            .factors()
            .iter()
            .filter_map(|f| match f {
                FactorState::Detector { captures, .. } => Some(captures.iter().copied()),
                _ => None,
            })
            .flatten()
            .collect();
        if self.wave.particles == 1 {
            if counts.len() == 1 {
                return "capture".into();
            }
            if let Some(i) = counts.iter().position(|&c| c == 1) {
                return format!("capture-area-{}", i + 1);
            }
        }
        let parts: Vec<String> = counts.iter().map(u32::to_string).collect();
        format!("captures-{}", parts.join("-"))
    }
}

fn offer(
    earliest: &mut BTreeMap<ComponentLabel, f64>,
    queue: &mut VecDeque<ComponentLabel>,
    label: ComponentLabel,
    t: f64,
) {
    if earliest.get(&label).is_none_or(|&e| t < e) {
        earliest.insert(label.clone(), t);
        queue.push_back(label);
    }
}

/// A validated scenario with its component graph and per-label outcome tags.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    def: ScenarioDef,
    graph: Graph,
    tags: Vec<Arc<str>>,
    exit_observers: Vec<ObserverId>,
}

impl CompiledScenario {
    pub fn def(&self) -> &ScenarioDef {
        &self.def
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn run_config(&self) -> &RunConfig {
        &self.def.run
    }

    /// Same graph under different run settings.
    pub fn with_run(&self, run: RunConfig) -> Result<CompiledScenario, ScenarioError> {
        let mut def = self.def.clone();
        def.run = run;
        def.validate()?;
        Ok(CompiledScenario { def, ..self.clone() })
    }

    pub fn tag(&self, experienced: LabelId) -> Arc<str> {
        self.tags[experienced.idx()].clone()
    }

    /// Tag for a run that ends with the observer drifting into unconsciousness:
    /// a capture already experienced is kept, otherwise the exit is the outcome.
    pub fn exit_tag(&self, experienced: LabelId) -> Arc<str> {
        if self.graph.label(experienced).total_captures() > 0 {
            self.tag(experienced)
        } else {
            Arc::from("unconscious-exit")
        }
    }

    pub fn exit_observers(&self) -> &[ObserverId] {
        &self.exit_observers
    }

    /// Every tag a run of this scenario can end with, sorted.
    pub fn possible_tags(&self) -> Vec<Arc<str>> {
        let mut tags: Vec<Arc<str>> = self.tags.clone();
        if !self.exit_observers.is_empty() {
            tags.push(Arc::from("unconscious-exit"));
        }
        tags.sort();
        tags.dedup();
        tags
    }
}
