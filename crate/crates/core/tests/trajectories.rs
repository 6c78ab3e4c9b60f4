use redsim_core::catalog::{build, expected_branch_weights, ScenarioKind, ScenarioParams};
use redsim_core::dynamics::{Integrator, SystemState};
use redsim_core::engine::{run_trajectory, run_trajectory_with, Probe, RandomStream, ReductionEvent, TriggerScope};
use redsim_core::graph::{Graph, LabelId};
use redsim_core::model::{BrainLabel, BrainMode, ObserverId};

#[derive(Default)]
struct Conservation {
    worst: f64,
    steps: usize,
}

impl Probe for Conservation {
    fn on_step(&mut self, _graph: &Graph, state: &SystemState, _hazard: f64) {
        let err = (state.total_weight() - state.s()).abs() / state.s();
        self.worst = self.worst.max(err);
        self.steps += 1;
    }
}

#[test]
fn weight_is_conserved_between_reductions_in_every_scenario() {
    for kind in ScenarioKind::ALL {
        let sc = build(kind, &ScenarioParams::for_kind(kind)).unwrap();
        let mut probe = Conservation::default();
        for i in 0..20 {
            run_trajectory_with(&sc, RandomStream::new(17, i), &mut probe).unwrap();
        }
        assert!(probe.worst <= 1e-9, "{kind}: {}", probe.worst);
        assert!(probe.steps > 20, "{kind}");
    }
}

fn frequency(kind: ScenarioKind, params: &ScenarioParams, tag: &str, runs: u64) -> f64 {
    let sc = build(kind, params).unwrap();
    let hits = (0..runs)
        .filter(|&i| &*run_trajectory(&sc, RandomStream::new(2024, i)).unwrap().outcome_tag == tag)
        .count();
    hits as f64 / runs as f64
}

#[test]
fn capture_frequency_matches_the_closed_form() {
    let runs = 20_000;
    for kind in [ScenarioKind::ContinuousObserver, ScenarioKind::IntermediateObserver] {
        let p = ScenarioParams::for_kind(kind);
        let expected = expected_branch_weights(kind, &p).unwrap()["capture"];
        let f = frequency(kind, &p, "capture", runs);
        let sigma = (expected * (1.0 - expected) / runs as f64).sqrt();
        assert!((f - expected).abs() <= 3.0 * sigma, "{kind}: {f} vs {expected}");
    }
}

#[test]
fn physiological_latency_keeps_the_statistics() {
    let runs = 10_000;
    let mut p = ScenarioParams::for_kind(ScenarioKind::TerminalObserver);
    p.latency = 0.1;
    let sc = build(ScenarioKind::TerminalObserver, &p).unwrap();
    let mut captures = 0;
    for i in 0..runs {
        let out = run_trajectory(&sc, RandomStream::new(8, i)).unwrap();
        assert_eq!(out.reductions().count(), 1);
        assert!(out.events[0].t >= 12.0);
        captures += (&*out.outcome_tag == "capture") as u64;
    }
    let expected = 1.0 - (-1.0f64).exp();
    let f = captures as f64 / runs as f64;
    let sigma = (expected * (1.0 - expected) / runs as f64).sqrt();
    assert!((f - expected).abs() <= 3.0 * sigma, "{f}");
}

#[test]
fn late_observer_inflow_integrates_to_one() {
    let sc = build(ScenarioKind::TerminalObserver, &ScenarioParams::for_kind(ScenarioKind::TerminalObserver)).unwrap();
    let g = sc.graph();
    let mut state = SystemState::new(g, 0.0);
    let mut integ = Integrator::new(g, TriggerScope::ReadyOnly);
    let mut inflow = 0.0;
    while state.t() < 40.0 - 1e-12 {
        let bound = g.next_breakpoint_after(state.t()).unwrap_or(40.0).min(40.0);
        let mut dt = 0.05f64.min(bound - state.t());
        state.activate_targets(g, state.t() + dt);
        dt = dt.min(integ.max_stable_dt(g, &state));
        integ.propose(g, &state, dt).unwrap();
        inflow += g.ids().filter(|&id| g.has_ready(id)).map(|id| integ.gained()[id.idx()]).sum::<f64>();
        integ.commit(&mut state);
    }
    assert!((inflow - 1.0).abs() < 1e-6, "{inflow}");
}

#[derive(Default)]
struct Phantoms {
    /// (id, weight when first seen as phantom)
    seen: Vec<(LabelId, f64)>,
    changed: bool,
    left_after_reduction: usize,
}

impl Probe for Phantoms {
    fn on_step(&mut self, _graph: &Graph, state: &SystemState, _hazard: f64) {
        for id in state.present_ids().filter(|&id| state.is_phantom(id)) {
            match self.seen.iter().find(|(p, _)| *p == id) {
                Some((_, w)) => self.changed |= *w != state.weight(id),
                None => self.seen.push((id, state.weight(id))),
            }
        }
    }

    fn on_event(&mut self, _graph: &Graph, _event: &ReductionEvent, after: &SystemState) {
        self.left_after_reduction += after.present_ids().filter(|&id| after.is_phantom(id)).count();
        self.seen.clear();
    }
}

#[test]
fn late_second_observer_never_sees_a_late_capture() {
    let sc = build(ScenarioKind::OutsideTerminal, &ScenarioParams::for_kind(ScenarioKind::OutsideTerminal)).unwrap();
    let g = sc.graph();
    let mut residual = 0;
    for i in 0..3000 {
        let mut probe = Phantoms::default();
        let out = run_trajectory_with(&sc, RandomStream::new(41, i), &mut probe).unwrap();
        let first = &out.events[0];
        if first.t >= 10.0 {
            residual += 1;
            assert_eq!(&*out.outcome_tag, "no-capture");
            let seen = g.label(out.experienced);
            for o in [ObserverId(0), ObserverId(1)] {
                let b = seen.brain(o).unwrap();
                assert_eq!((b.label, b.mode), (BrainLabel::percept(0), BrainMode::Conscious));
            }
        }
        assert!(!probe.changed, "phantom weight changed in run {i}");
        assert_eq!(probe.left_after_reduction, 0);
    }
    assert!(residual > 800);
}

#[test]
fn drifting_away_ends_in_exit_or_capture() {
    let sc = build(ScenarioKind::DriftingAway, &ScenarioParams::for_kind(ScenarioKind::DriftingAway)).unwrap();
    let mut exits = 0;
    for i in 0..200 {
        let out = run_trajectory(&sc, RandomStream::new(4, i)).unwrap();
        match &*out.outcome_tag {
            "unconscious-exit" => {
                exits += 1;
                assert!(out.reductions().next().is_none());
            }
            "capture" => assert_eq!(out.reductions().count(), 1),
            other => panic!("unexpected tag {other}"),
        }
        assert!(out.terminated_at < 1000.0);
    }
    assert!(exits > 50);
}
