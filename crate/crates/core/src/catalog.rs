//! Ready-made scenarios: one observer watching a detector in various timings,
//! two observers, drifting attention, and multi-area / multi-particle setups.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::RateFunction;
use crate::engine::TriggerScope;
use crate::model::{DetectorId, ObserverId};
use crate::scenario::{
    CompiledScenario, DetectorDecl, DriftCoupling, DriftInto, Observation, PrimaryCoupling, RunConfig, ScenarioDef,
    ScenarioError, WaveDecl,
};

pub const WAVE: &str = "psi";
pub const DETECTOR: &str = "D";
pub const FIRST_OBSERVER: &str = "alice";
pub const SECOND_OBSERVER: &str = "bob";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Bare,
    ContinuousObserver,
    TerminalObserver,
    IntermediateObserver,
    OutsideTerminal,
    IntermediateOutside,
    Drift,
    DriftingAway,
    CoObserver,
    MultiParticle,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 10] = [
        ScenarioKind::Bare,
        ScenarioKind::ContinuousObserver,
        ScenarioKind::TerminalObserver,
        ScenarioKind::IntermediateObserver,
        ScenarioKind::OutsideTerminal,
        ScenarioKind::IntermediateOutside,
        ScenarioKind::Drift,
        ScenarioKind::DriftingAway,
        ScenarioKind::CoObserver,
        ScenarioKind::MultiParticle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Bare => "bare",
            ScenarioKind::ContinuousObserver => "continuous_observer",
            ScenarioKind::TerminalObserver => "terminal_observer",
            ScenarioKind::IntermediateObserver => "intermediate_observer",
            ScenarioKind::OutsideTerminal => "outside_terminal",
            ScenarioKind::IntermediateOutside => "intermediate_outside",
            ScenarioKind::Drift => "drift",
            ScenarioKind::DriftingAway => "drifting_away",
            ScenarioKind::CoObserver => "co_observer",
            ScenarioKind::MultiParticle => "multi_particle",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::Bare => "particle wave and detector with no observer",
            ScenarioKind::ContinuousObserver => "observer watches the detector from the start",
            ScenarioKind::TerminalObserver => "observer looks only after the capture window has closed",
            ScenarioKind::IntermediateObserver => "observer looks in the middle of the capture window",
            ScenarioKind::OutsideTerminal => {
                "second observer looks at a watched detector after the window; no late capture possible"
            }
            ScenarioKind::IntermediateOutside => "second observer looks at a watched detector during the window",
            ScenarioKind::Drift => "conscious state drifts among neighboring brain states",
            ScenarioKind::DriftingAway => "conscious state drifts into unconsciousness",
            ScenarioKind::CoObserver => "two observers each watch one area of a two-area detector",
            ScenarioKind::MultiParticle => "two observers, two areas, several particles",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scenario kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("no closed-form outcome probabilities for scenario {0}")]
    NoOracle(ScenarioKind),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub primary_rate: f64,
    /// Capture window `[t0, t_f)`.
    pub window: (f64, f64),
    pub physiological_rate: f64,
    pub latency: f64,
    /// Overrides of the per-kind observation times, keyed by observer name.
    pub observation_times: BTreeMap<String, f64>,
    pub drift_rate: f64,
    pub drift_neighbors: u32,
    /// Defaults to `[0, 20]` for drift and `[0, horizon]` for drifting away.
    pub drift_window: Option<(f64, f64)>,
    pub area_rates: (f64, f64),
    pub particles: u32,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub runs: u64,
    pub scope: TriggerScope,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        let run = RunConfig::default();
        ScenarioParams {
            primary_rate: 0.1,
            window: (0.0, 10.0),
            physiological_rate: 2.0,
            latency: 0.0,
            observation_times: BTreeMap::new(),
            drift_rate: 0.05,
            drift_neighbors: 3,
            drift_window: None,
            area_rates: (0.05, 0.05),
            particles: 1,
            horizon: run.horizon,
            dt: run.dt,
            seed: run.seed,
            runs: run.runs,
            scope: run.scope,
        }
    }
}

impl ScenarioParams {
    /// Defaults adjusted for one kind (particle count and horizon).
    pub fn for_kind(kind: ScenarioKind) -> Self {
        let mut p = ScenarioParams::default();
        match kind {
            ScenarioKind::MultiParticle => p.particles = 2,
            ScenarioKind::DriftingAway => {
                // The slow exit dominates the run length; drain control still
                // bounds each step inside the capture window.
                p.horizon = 1000.0;
                p.dt = 0.5;
            }
            _ => {}
        }
        p
    }

    fn observation_time(&self, observer: &str, default: f64) -> f64 {
        self.observation_times.get(observer).copied().unwrap_or(default)
    }

    pub fn capture_window_length(&self) -> f64 {
        self.window.1 - self.window.0
    }
}

fn default_observation_times(kind: ScenarioKind) -> &'static [(&'static str, f64)] {
    match kind {
        ScenarioKind::Bare => &[],
        ScenarioKind::ContinuousObserver | ScenarioKind::Drift | ScenarioKind::DriftingAway => {
            &[(FIRST_OBSERVER, 0.0)]
        }
        ScenarioKind::TerminalObserver => &[(FIRST_OBSERVER, 12.0)],
        ScenarioKind::IntermediateObserver => &[(FIRST_OBSERVER, 5.0)],
        ScenarioKind::OutsideTerminal => &[(FIRST_OBSERVER, 0.0), (SECOND_OBSERVER, 12.0)],
        ScenarioKind::IntermediateOutside => &[(FIRST_OBSERVER, 0.0), (SECOND_OBSERVER, 5.0)],
        ScenarioKind::CoObserver | ScenarioKind::MultiParticle => &[(FIRST_OBSERVER, 0.0), (SECOND_OBSERVER, 0.0)],
    }
}

/// The scenario description for one kind, before compilation.
pub fn definition(kind: ScenarioKind, params: &ScenarioParams) -> Result<ScenarioDef, CatalogError> {
    let (t0, tf) = params.window;
    if !(t0 < tf && tf <= params.horizon) {
        return Err(ScenarioError::Invalid(format!(
            "capture window [{t0}, {tf}] must satisfy t0 < t_f <= horizon {}",
            params.horizon
        ))
        .into());
    }
    let two_areas = matches!(kind, ScenarioKind::CoObserver | ScenarioKind::MultiParticle);
    let particles = match kind {
        ScenarioKind::MultiParticle => params.particles,
        _ => 1,
    };
    let window = |k: f64| RateFunction::Window { k, start: t0, end: tf };
    let primaries = if two_areas {
        vec![
            PrimaryCoupling { detector: DetectorId(0), area: 1, rate: window(params.area_rates.0) },
            PrimaryCoupling { detector: DetectorId(0), area: 2, rate: window(params.area_rates.1) },
        ]
    } else {
        vec![PrimaryCoupling { detector: DetectorId(0), area: 1, rate: window(params.primary_rate) }]
    };

    let defaults = default_observation_times(kind);
    let observers: Vec<String> = defaults.iter().map(|(n, _)| n.to_string()).collect();
    if let Some(unknown) = params.observation_times.keys().find(|k| !observers.contains(k)) {
        return Err(ScenarioError::Invalid(format!("scenario {kind} has no observer `{unknown}`")).into());
    }
    let observations = defaults
        .iter()
        .enumerate()
        .map(|(i, (name, at))| Observation {
            observer: ObserverId(i as u16),
            detector: DetectorId(0),
            area: if two_areas { i as u32 + 1 } else { 1 },
            at: params.observation_time(name, *at),
            rate: params.physiological_rate,
            latency: params.latency,
        })
        .collect();

    let drifts = match kind {
        ScenarioKind::Drift => vec![DriftCoupling {
            observer: ObserverId(0),
            rate: params.drift_rate,
            neighbors: params.drift_neighbors,
            window: params.drift_window.unwrap_or((0.0, 20.0)),
            into: DriftInto::Ready,
        }],
        ScenarioKind::DriftingAway => vec![DriftCoupling {
            observer: ObserverId(0),
            rate: params.drift_rate,
            neighbors: 1,
            window: params.drift_window.unwrap_or((0.0, params.horizon)),
            into: DriftInto::Unconscious,
        }],
        _ => Vec::new(),
    };

    Ok(ScenarioDef {
        kind: Some(kind),
        wave: WaveDecl { name: WAVE.into(), particles },
        detectors: vec![DetectorDecl { name: DETECTOR.into(), areas: if two_areas { 2 } else { 1 } }],
        observers,
        primaries,
        observations,
        drifts,
        custom_edges: Vec::new(),
        run: RunConfig {
            seed: params.seed,
            runs: params.runs,
            dt: params.dt,
            horizon: params.horizon,
            scope: params.scope,
        },
    })
}

pub fn build(kind: ScenarioKind, params: &ScenarioParams) -> Result<CompiledScenario, CatalogError> {
    Ok(definition(kind, params)?.compile()?)
}

/// Closed-form outcome probabilities of the linear-drain model, where they exist.
pub fn expected_branch_weights(
    kind: ScenarioKind,
    params: &ScenarioParams,
) -> Result<BTreeMap<String, f64>, CatalogError> {
    let t = params.capture_window_length();
    let mut out = BTreeMap::new();
    match kind {
        ScenarioKind::Bare => {
            out.insert("superposition-persists".into(), 1.0);
        }
        ScenarioKind::ContinuousObserver | ScenarioKind::TerminalObserver | ScenarioKind::IntermediateObserver => {
            let miss = (-params.primary_rate * t).exp();
            out.insert("capture".into(), 1.0 - miss);
            out.insert("no-capture".into(), miss);
        }
        ScenarioKind::CoObserver => {
            let (k1, k2) = params.area_rates;
            let k = k1 + k2;
            let miss = (-k * t).exp();
            let (p1, p2) = if k > 0.0 { (k1 / k * (1.0 - miss), k2 / k * (1.0 - miss)) } else { (0.0, 0.0) };
            out.insert("capture-area-1".into(), p1);
            out.insert("capture-area-2".into(), p2);
            out.insert("no-capture".into(), miss);
        }
        other => return Err(CatalogError::NoOracle(other)),
    }
    Ok(out)
}
