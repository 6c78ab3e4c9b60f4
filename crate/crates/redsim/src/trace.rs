use std::io::Write;

use redsim_core::dynamics::SystemState;
use redsim_core::engine::{run_trajectory_with, EngineError, Probe, RandomStream, TrajectoryOutcome};
use redsim_core::graph::Graph;
use redsim_core::CompiledScenario;

/// Per-step record of one trajectory: time, every label's weight in graph
/// order, and the hazard.
#[derive(Debug, Clone)]
pub struct Trace {
    pub labels: Vec<String>,
    pub rows: Vec<TraceRow>,
    pub outcome: TrajectoryOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub s: f64,
    pub weights: Vec<f64>,
    pub hazard: f64,
}

#[derive(Default)]
struct Recorder {
    rows: Vec<TraceRow>,
}

impl Probe for Recorder {
    fn wants_hazard(&self) -> bool {
        true
    }

    fn on_step(&mut self, _graph: &Graph, state: &SystemState, hazard: f64) {
        self.rows.push(TraceRow { t: state.t(), s: state.s(), weights: state.weights().to_vec(), hazard });
    }
}

/// Runs trajectory `run_index` of `seed` and records every step.
pub fn trace(scenario: &CompiledScenario, seed: u64, run_index: u64) -> Result<Trace, EngineError> {
    let mut rec = Recorder::default();
    let outcome = run_trajectory_with(scenario, RandomStream::new(seed, run_index), &mut rec)?;
    let g = scenario.graph();
    Ok(Trace { labels: g.ids().map(|id| g.display(id)).collect(), rows: rec.rows, outcome })
}

impl Trace {
    /// Largest relative gap between the summed weights and `s` over all rows.
    pub fn worst_conservation(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.s > 0.0)
            .map(|r| (r.weights.iter().sum::<f64>() - r.s).abs() / r.s)
            .fold(0.0, f64::max)
    }

    /// Comma-separated, LF-terminated, with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        header.push("hazard".to_string());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = Vec::with_capacity(row.weights.len() + 2);
            rec.push(number(row.t));
            rec.extend(row.weights.iter().copied().map(number));
            rec.push(number(row.hazard));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal, with negative zero written as `0`.
fn number(x: f64) -> String {
    (x + 0.0).to_string()
}
