//! Rule engine and trajectory simulator for state reduction with observers.
//!
//! Superposition components carry non-negative weights that flow along
//! interaction edges. A stochastic hit chooses a component in proportion to
//! the current flowing into it; its ready brain states become conscious and
//! every other component is dropped.

pub mod catalog;
pub mod dynamics;
pub mod engine;
pub mod graph;
pub mod model;
pub mod scenario;

pub use catalog::{build, expected_branch_weights, CatalogError, ScenarioKind, ScenarioParams};
pub use dynamics::{EdgeKind, InteractionEdge, RateFunction, SystemState};
pub use engine::{run_trajectory, RandomStream, ReductionEvent, TrajectoryOutcome, TriggerScope};
pub use graph::{Graph, LabelId};
pub use model::{BrainMode, ComponentLabel};
pub use scenario::{CompiledScenario, RunConfig, ScenarioDef, ScenarioError};
