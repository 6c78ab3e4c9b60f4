use redsim_core::dynamics::SystemState;
use redsim_core::engine::{EventKind, Probe, ReductionEvent};
use redsim_core::graph::{Graph, LabelId};
use redsim_core::model::{BrainLabel, BrainMode, ObserverId};
use serde::{Deserialize, Serialize};

/// Largest relative gap between the summed weights and `s` tolerated at a step.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

/// Rule-violation counters. All zero in a passing run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Violations {
    /// Steps where the summed weights drifted from `s`.
    pub conservation: u64,
    /// Steps where an observer held two different conscious states.
    pub consciousness: u64,
    /// Reductions that chose a component without a ready state.
    pub illegal_reduction: u64,
    /// Edges with the same observer ready on both ends.
    pub forbidden_edge: u64,
    /// Phantom components left over right after a reduction.
    pub phantom_residue: u64,
    /// Phantom components whose weight changed.
    pub phantom_drift: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.conservation
            + self.consciousness
            + self.illegal_reduction
            + self.forbidden_edge
            + self.phantom_residue
            + self.phantom_drift
    }

    pub fn merge(&mut self, other: &Violations) {
        self.conservation += other.conservation;
        self.consciousness += other.consciousness;
        self.illegal_reduction += other.illegal_reduction;
        self.forbidden_edge += other.forbidden_edge;
        self.phantom_residue += other.phantom_residue;
        self.phantom_drift += other.phantom_drift;
    }
}

/// Probe that checks the model's invariants at every step of one trajectory.
#[derive(Debug, Default)]
pub struct Audit {
    pub violations: Violations,
    pub worst_conservation: f64,
    /// Phantom components seen since the last reduction, with their weight
    /// when first seen.
    phantoms: Vec<(LabelId, f64)>,
    /// Whether the trajectory ever held a phantom component.
    pub saw_phantom: bool,
    conscious: Vec<(ObserverId, BrainLabel)>,
}

impl Audit {
    pub fn new() -> Self {
        Audit::default()
    }
}

impl Probe for Audit {
    fn on_step(&mut self, graph: &Graph, state: &SystemState, _hazard: f64) {
        let s = state.s();
        if s > 0.0 {
            let err = (state.total_weight() - s).abs() / s;
            self.worst_conservation = self.worst_conservation.max(err);
            if err > CONSERVATION_TOLERANCE {
                self.violations.conservation += 1;
            }
        }

        self.conscious.clear();
        let mut clash = false;
        for id in state.present_ids() {
            for b in graph.label(id).brains().filter(|b| b.mode == BrainMode::Conscious) {
                match self.conscious.iter().find(|(o, _)| *o == b.observer) {
                    Some((_, seen)) if *seen != b.label => clash = true,
                    Some(_) => {}
                    None => self.conscious.push((b.observer, b.label)),
                }
            }
        }
        self.violations.consciousness += clash as u64;

        for id in state.present_ids().filter(|&id| state.is_phantom(id)) {
            self.saw_phantom = true;
            match self.phantoms.iter().find(|(p, _)| *p == id) {
                Some((_, w)) => self.violations.phantom_drift += (*w != state.weight(id)) as u64,
                None => self.phantoms.push((id, state.weight(id))),
            }
        }
    }

    fn on_event(&mut self, graph: &Graph, event: &ReductionEvent, after: &SystemState) {
        if event.kind != EventKind::Reduction {
            return;
        }
        if !graph.has_ready(event.chosen) {
            self.violations.illegal_reduction += 1;
        }
        self.violations.phantom_residue += after.present_ids().filter(|&id| after.is_phantom(id)).count() as u64;
        self.phantoms.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use redsim_core::catalog::{build, ScenarioKind, ScenarioParams};
    use redsim_core::engine::{run_trajectory_with, RandomStream};

    #[test]
    fn catalog_runs_are_clean() {
        for kind in [ScenarioKind::OutsideTerminal, ScenarioKind::Drift, ScenarioKind::CoObserver] {
            let sc = build(kind, &ScenarioParams::for_kind(kind)).unwrap();
            for i in 0..50 {
                let mut audit = Audit::new();
                run_trajectory_with(&sc, RandomStream::new(3, i), &mut audit).unwrap();
                assert_eq!(audit.violations, Violations::default(), "{kind}");
                assert!(audit.worst_conservation <= CONSERVATION_TOLERANCE);
            }
        }
    }

    #[test]
    fn merge_adds_counters() {
        let mut a = Violations { conservation: 1, ..Default::default() };
        a.merge(&Violations { conservation: 2, phantom_drift: 1, ..Default::default() });
        assert_eq!((a.conservation, a.phantom_drift, a.total()), (3, 1, 4));
    }
}
