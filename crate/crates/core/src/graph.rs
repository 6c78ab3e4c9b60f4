use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{EdgeKind, InteractionEdge, RateFunction};
use crate::model::{rule4_allows, BrainMode, ComponentLabel, Names};

/// Engine state uses one bit per component, so a graph holds at most this many labels.
pub const MAX_COMPONENTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub u16);

impl LabelId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub(crate) fn bit(self) -> u64 {
        1u64 << self.0
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("transition {source_label} -> {target_label} is forbidden: both carry a ready state of the same observer")]
    ForbiddenEdge { source_label: String, target_label: String },
    #[error("latency is only allowed on physiological edges ({0})")]
    LatencyOnNonPhysiological(String),
    #[error("invalid rate on edge {edge}: {reason}")]
    InvalidRate { edge: String, reason: String },
    #[error("scenario reaches {0} components; at most {MAX_COMPONENTS} are supported")]
    TooManyComponents(usize),
}

/// An edge between two labels before ids have been assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub source: ComponentLabel,
    pub target: ComponentLabel,
    pub rate: RateFunction,
    pub kind: EdgeKind,
    pub latency: f64,
}

/// The finite universe of component labels a scenario can reach, with the
/// admissible interaction edges between them.
#[derive(Debug, Clone)]
pub struct Graph {
    names: Names,
    labels: Vec<ComponentLabel>,
    index: HashMap<ComponentLabel, LabelId>,
    edges: Vec<InteractionEdge>,
    inbound: Vec<Vec<usize>>,
    outbound: Vec<Vec<usize>>,
    ready: u64,
    conscious: u64,
    promote: Vec<Option<LabelId>>,
    initial: LabelId,
    breakpoints: Vec<f64>,
    max_latency: f64,
}

impl Graph {
    /// Builds the graph; every edge is checked against the ready-state
    /// transition rule, and labels with ready factors get their promoted
    /// (all-ready-become-conscious) counterpart added to the universe.
    pub fn new(names: Names, initial: ComponentLabel, edges: Vec<EdgeSpec>) -> Result<Self, GraphError> {
        let mut labels: Vec<ComponentLabel> = Vec::new();
        labels.push(initial.clone());
        for e in &edges {
            if !rule4_allows(&e.source, &e.target) {
                return Err(GraphError::ForbiddenEdge {
                    source_label: e.source.display(&names).to_string(),
                    target_label: e.target.display(&names).to_string(),
                });
            }
            if e.latency != 0.0 && e.kind != EdgeKind::Physiological {
                return Err(GraphError::LatencyOnNonPhysiological(
                    e.source.display(&names).to_string(),
                ));
            }
            if let Err(reason) = e.rate.validate() {
                return Err(GraphError::InvalidRate {
                    edge: format!("{} -> {}", e.source.display(&names), e.target.display(&names)),
                    reason,
                });
            }
            if !(e.latency >= 0.0 && e.latency.is_finite()) {
                return Err(GraphError::InvalidRate {
                    edge: e.source.display(&names).to_string(),
                    reason: format!("latency {} must be finite and non-negative", e.latency),
                });
            }
            labels.push(e.source.clone());
            labels.push(e.target.clone());
        }
        let mut i = 0;
        while i < labels.len() {
            if labels[i].has_mode(BrainMode::Ready) {
                labels.push(labels[i].promote_ready());
            }
            i += 1;
            if labels.len() > 16 * MAX_COMPONENTS {
                break;
            }
        }
        labels.sort();
        labels.dedup();
        if labels.len() > MAX_COMPONENTS {
            return Err(GraphError::TooManyComponents(labels.len()));
        }

        let index: HashMap<ComponentLabel, LabelId> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), LabelId(i as u16)))
            .collect();
        let n = labels.len();
        let mut inbound = vec![Vec::new(); n];
        let mut outbound = vec![Vec::new(); n];
        let mut compiled = Vec::with_capacity(edges.len());
        let mut breakpoints = Vec::new();
        let mut max_latency: f64 = 0.0;
        for (i, e) in edges.into_iter().enumerate() {
            let source = index[&e.source];
            let target = index[&e.target];
            inbound[target.idx()].push(i);
            outbound[source.idx()].push(i);
            breakpoints.extend(e.rate.breakpoints());
            max_latency = max_latency.max(e.latency);
            compiled.push(InteractionEdge {
                source,
                target,
                rate: e.rate,
                kind: e.kind,
                latency: e.latency,
            });
        }
        breakpoints.retain(|t| t.is_finite());
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();

        let mut ready = 0u64;
        let mut conscious = 0u64;
        let mut promote = vec![None; n];
        for (i, l) in labels.iter().enumerate() {
            if l.has_mode(BrainMode::Ready) {
                ready |= 1 << i;
                promote[i] = Some(index[&l.promote_ready()]);
            }
            if l.has_mode(BrainMode::Conscious) {
                conscious |= 1 << i;
            }
        }
        let initial = index[&initial];
        Ok(Graph {
            names,
            labels,
            index,
            edges: compiled,
            inbound,
            outbound,
            ready,
            conscious,
            promote,
            initial,
            breakpoints,
            max_latency,
        })
    }

    pub fn names(&self) -> &Names {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ComponentLabel] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = LabelId> + Clone {
        (0..self.labels.len() as u16).map(LabelId)
    }

    pub fn label(&self, id: LabelId) -> &ComponentLabel {
        &self.labels[id.idx()]
    }

    pub fn id_of(&self, label: &ComponentLabel) -> Option<LabelId> {
        self.index.get(label).copied()
    }

    pub fn display(&self, id: LabelId) -> String {
        self.labels[id.idx()].display(&self.names).to_string()
    }

    pub fn edges(&self) -> &[InteractionEdge] {
        &self.edges
    }

    pub fn inbound(&self, id: LabelId) -> impl Iterator<Item = &InteractionEdge> + '_ {
        self.inbound[id.idx()].iter().map(move |&i| &self.edges[i])
    }

    pub fn outbound(&self, id: LabelId) -> impl Iterator<Item = &InteractionEdge> + '_ {
        self.outbound[id.idx()].iter().map(move |&i| &self.edges[i])
    }

    pub fn has_ready(&self, id: LabelId) -> bool {
        self.ready & id.bit() != 0
    }

    pub fn has_conscious(&self, id: LabelId) -> bool {
        self.conscious & id.bit() != 0
    }

    pub(crate) fn ready_mask(&self) -> u64 {
        self.ready
    }

    /// The label a component becomes when it is chosen: ready factors flip to conscious.
    pub fn promoted(&self, id: LabelId) -> Option<LabelId> {
        self.promote[id.idx()]
    }

    pub fn initial(&self) -> LabelId {
        self.initial
    }

    /// Sorted instants at which some edge rate switches on or off.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn next_breakpoint_after(&self, t: f64) -> Option<f64> {
        let i = self.breakpoints.partition_point(|&b| b <= t);
        self.breakpoints.get(i).copied()
    }

    pub fn max_latency(&self) -> f64 {
        self.max_latency
    }

    /// Labels reachable from the initial component by following edges only
    /// (no reductions), in id order.
    pub fn edge_reachable_from_initial(&self) -> Vec<LabelId> {
        let mut seen = self.initial.bit();
        let mut stack = vec![self.initial];
        while let Some(id) = stack.pop() {
            for e in self.outbound(id) {
                if seen & e.target.bit() == 0 {
                    seen |= e.target.bit();
                    stack.push(e.target);
                }
            }
        }
        self.ids().filter(|id| seen & id.bit() != 0).collect()
    }

    /// Re-verifies the ready-state transition rule on every edge; returns the
    /// offending edges (empty for any graph built by [`Graph::new`]).
    pub fn forbidden_edges(&self) -> Vec<&InteractionEdge> {
        self.edges
            .iter()
            .filter(|e| !rule4_allows(self.label(e.source), self.label(e.target)))
            .collect()
    }
}
