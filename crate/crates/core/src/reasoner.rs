//! Semantic reasoning over the obstacle knowledge graph.
//!
//! [`Reasoner::decide`] evaluates the graph itself: edges labeled `implies`
//! (and `has_*`, `if_true`/`if_false`) act as OR-gates into their
//! destination, `requires`/`enables` edges as an AND-gate. The action outputs
//! are checked in priority order lane change, sudden braking; drive-through
//! is the default. The closed-form functions [`derive_impulse`],
//! [`assess_hazard`] and [`rule_decision`] state the same policy directly
//! over a [`PropertyValuation`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::ontology::{
    build_graph, ids, relation, validate_graph, Catalog, DensityClass, ImpulseClass, KnowledgeGraph, Layer,
    MalleabilityClass, MassClass, ObstacleClass, PassUnderClass, PropertyValuation, UndersideRiskClass,
    ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    LaneChange,
    SuddenBrake,
    Proceed,
}

impl Decision {
    pub const ALL: [Decision; 3] = [Decision::LaneChange, Decision::SuddenBrake, Decision::Proceed];

    /// Wire token, e.g. `SUDDEN_BRAKE`.
    pub fn token(self) -> &'static str {
        match self {
            Decision::LaneChange => "LANE_CHANGE",
            Decision::SuddenBrake => "SUDDEN_BRAKE",
            Decision::Proceed => "PROCEED",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Decision::ALL.into_iter().find(|d| d.token() == token)
    }

    pub fn output_node(self) -> &'static str {
        match self {
            Decision::LaneChange => ids::OUT_LANE_CHANGE,
            Decision::SuddenBrake => ids::OUT_SUDDEN_BRAKING,
            Decision::Proceed => ids::OUT_DRIVE_THROUGH,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedAssessment {
    pub impulse: ImpulseClass,
    /// Whether the malleability evidence agrees with the impulse verdict.
    pub consistent: bool,
}

/// Expected impulse from mass and density, cross-validated by malleability.
pub fn derive_impulse(v: PropertyValuation) -> DerivedAssessment {
    let impulse = if v.mass == MassClass::Heavy || v.density == DensityClass::High {
        ImpulseClass::High
    } else {
        ImpulseClass::Low
    };
    let consistent = matches!(
        (v.malleability, impulse),
        (MalleabilityClass::High, ImpulseClass::Low) | (MalleabilityClass::Low, ImpulseClass::High)
    );
    DerivedAssessment { impulse, consistent }
}

pub fn assess_hazard(v: PropertyValuation, d: DerivedAssessment) -> bool {
    (v.pass_under == PassUnderClass::CannotPass && v.malleability == MalleabilityClass::Low)
        || v.underside_risk == UndersideRiskClass::High
        || d.impulse == ImpulseClass::High
}

pub fn sudden_brake_condition(v: PropertyValuation) -> bool {
    v.pass_under == PassUnderClass::CannotPass && v.underside_risk == UndersideRiskClass::High
}

/// The decision policy in closed form, without touching the graph.
pub fn rule_decision(v: PropertyValuation, lane_feasible: bool) -> Decision {
    let hazard = assess_hazard(v, derive_impulse(v));
    if lane_feasible && hazard {
        Decision::LaneChange
    } else if !lane_feasible && sudden_brake_condition(v) {
        Decision::SuddenBrake
    } else {
        Decision::Proceed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub node: String,
    /// Relation of the edge that led here; `None` on the first step.
    pub via: Option<String>,
}

/// Justification for a decision: a directed path from the obstacle's input
/// node to the chosen output, plus every other node the evaluation consulted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTrace {
    pub path: Vec<TraceStep>,
    /// Active property/risk nodes and context inputs, sorted by id.
    pub evidence: Vec<String>,
    pub assessment: DerivedAssessment,
}

impl DecisionTrace {
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.path.iter().map(|s| s.node.as_str())
    }

    /// Comma-joined path node ids, as carried on the wire.
    pub fn joined(&self) -> String {
        self.node_ids().collect::<Vec<_>>().join(",")
    }

    /// Human-readable rendering: `a -[rel]-> b -[rel]-> c`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for step in &self.path {
            if let Some(rel) = &step.via {
                out.push_str(&format!(" -[{rel}]-> "));
            }
            out.push_str(&step.node);
        }
        out
    }

    /// Checks the path: starts at an input, ends at an output, and every
    /// consecutive pair is joined by an edge with the recorded relation.
    pub fn check(&self, g: &KnowledgeGraph) -> Result<(), String> {
        let layer = |id: &str| g.node(id).map(|n| n.layer);
        let (first, last) = match (self.path.first(), self.path.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err("empty trace".into()),
        };
        if layer(&first.node) != Some(Layer::Input) {
            return Err(format!("trace starts at non-input `{}`", first.node));
        }
        if layer(&last.node) != Some(Layer::Output) {
            return Err(format!("trace ends at non-output `{}`", last.node));
        }
        if let Some(mid) = self.path[..self.path.len() - 1].iter().find(|s| layer(&s.node) == Some(Layer::Output)) {
            return Err(format!("trace passes through output `{}` before its end", mid.node));
        }
        for pair in self.path.windows(2) {
            let rel = pair[1].via.as_deref().unwrap_or("");
            if !g.outgoing(&pair[0].node).any(|e| e.dst == pair[1].node && e.relation == rel) {
                return Err(format!("no edge {} -[{rel}]-> {}", pair[0].node, pair[1].node));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReasonerError {
    #[error("unknown obstacle `{0}`")]
    UnknownObstacle(String),
    #[error("graph is missing required node `{0}`")]
    MissingNode(&'static str),
    #[error("invalid graph:\n{0}")]
    InvalidGraph(ValidationReport),
    #[error("no justification path from `{input}` to `{output}`")]
    Unjustified { input: String, output: String },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Gate {
    Any,
    All,
    Inert,
}

fn gate_of(rel: &str) -> Gate {
    match rel {
        relation::IMPLIES | relation::IF_TRUE | relation::IF_FALSE => Gate::Any,
        relation::REQUIRES | relation::ENABLES => Gate::All,
        r if r.starts_with(relation::HAS_PREFIX) => Gate::Any,
        _ => Gate::Inert,
    }
}

/// Graph-backed decision maker. Holds a validated graph.
#[derive(Debug, Clone)]
pub struct Reasoner {
    graph: KnowledgeGraph,
    order: Vec<String>,
}

impl Reasoner {
    pub fn new(graph: KnowledgeGraph) -> Result<Self, ReasonerError> {
        let report = validate_graph(&graph);
        if !report.is_ok() {
            return Err(ReasonerError::InvalidGraph(report));
        }
        for required in [
            ids::LANE_FEASIBLE,
            ids::IMPULSE_HIGH,
            ids::IMPULSE_LOW,
            ids::OUT_LANE_CHANGE,
            ids::OUT_SUDDEN_BRAKING,
            ids::OUT_DRIVE_THROUGH,
        ] {
            if !graph.contains_node(required) {
                return Err(ReasonerError::MissingNode(required));
            }
        }
        let order = topological_order(&graph);
        Ok(Self { graph, order })
    }

    pub fn from_catalog(catalog: &Catalog) -> Self {
        Self::new(build_graph(catalog)).expect("built graph is valid")
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn knows(&self, obstacle_id: &str) -> bool {
        self.graph.node(&ids::obstacle(obstacle_id)).is_some_and(|n| n.layer == Layer::Input && !is_context(&n.id))
    }

    pub fn decide_obstacle(
        &self,
        obstacle: &ObstacleClass,
        lane_feasible: bool,
    ) -> Result<(Decision, DecisionTrace), ReasonerError> {
        self.decide(&obstacle.id, lane_feasible)
    }

    pub fn decide(&self, obstacle_id: &str, lane_feasible: bool) -> Result<(Decision, DecisionTrace), ReasonerError> {
        if !self.knows(obstacle_id) {
            return Err(ReasonerError::UnknownObstacle(obstacle_id.to_string()));
        }
        let input = ids::obstacle(obstacle_id);
        let mut active = self.propagate(&input, lane_feasible);

        let decision = if active.contains(ids::OUT_LANE_CHANGE) {
            Decision::LaneChange
        } else if active.contains(ids::OUT_SUDDEN_BRAKING) {
            Decision::SuddenBrake
        } else {
            Decision::Proceed
        };
        let output = decision.output_node();
        active.retain(|id| self.graph.node(id).is_some_and(|n| n.layer != Layer::Output));
        active.insert(output.to_string());

        let path = self
            .justify(&input, output, &active)
            .ok_or_else(|| ReasonerError::Unjustified { input: input.clone(), output: output.to_string() })?;

        let impulse = if active.contains(ids::IMPULSE_HIGH) { ImpulseClass::High } else { ImpulseClass::Low };
        let impulse_node = match impulse {
            ImpulseClass::High => ids::IMPULSE_HIGH,
            ImpulseClass::Low => ids::IMPULSE_LOW,
        };
        let consistent = self
            .graph
            .incoming(impulse_node)
            .any(|e| e.relation == relation::CROSS_VALIDATES && active.contains(&e.src));

        let evidence = active.iter().filter(|id| id.as_str() != input && id.as_str() != output).cloned().collect();

        Ok((decision, DecisionTrace { path, evidence, assessment: DerivedAssessment { impulse, consistent } }))
    }

    fn propagate(&self, input: &str, lane_feasible: bool) -> BTreeSet<String> {
        let mut active: BTreeSet<String> = BTreeSet::new();
        active.insert(input.to_string());
        active.insert(ids::LANE_FEASIBLE.to_string());

        for id in &self.order {
            let node = &self.graph.node(id).expect("ordered ids exist");
            if node.layer == Layer::Input {
                continue;
            }
            let mut any = false;
            let mut all_edges = 0;
            let mut all_met = true;
            for e in self.graph.incoming(id) {
                let src_on = active.contains(&e.src);
                match gate_of(&e.relation) {
                    Gate::Any => {
                        let fires = match e.relation.as_str() {
                            relation::IF_TRUE => src_on && lane_feasible,
                            relation::IF_FALSE => src_on && !lane_feasible,
                            _ => src_on,
                        };
                        any |= fires;
                    }
                    Gate::All => {
                        all_edges += 1;
                        all_met &= src_on;
                    }
                    Gate::Inert => {}
                }
            }
            if any || (all_edges > 0 && all_met) {
                active.insert(id.clone());
            }
        }
        active
    }

    /// Shortest directed path over active nodes, ties broken by edge order.
    fn justify(&self, input: &str, output: &str, active: &BTreeSet<String>) -> Option<Vec<TraceStep>> {
        let mut parent: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
        let mut queue = VecDeque::from([input]);
        let mut seen = BTreeSet::from([input]);
        while let Some(id) = queue.pop_front() {
            if id == output {
                break;
            }
            for e in self.graph.outgoing(id) {
                let traversable =
                    gate_of(&e.relation) != Gate::Inert || (e.relation == relation::FALLBACK && e.dst == output);
                if traversable && active.contains(&e.dst) && seen.insert(e.dst.as_str()) {
                    parent.insert(e.dst.as_str(), (id, e.relation.as_str()));
                    queue.push_back(e.dst.as_str());
                }
            }
        }
        if !seen.contains(output) {
            return None;
        }
        let mut path = vec![];
        let mut cursor = output;
        while let Some(&(prev, rel)) = parent.get(cursor) {
            path.push(TraceStep { node: cursor.to_string(), via: Some(rel.to_string()) });
            cursor = prev;
        }
        path.push(TraceStep { node: input.to_string(), via: None });
        path.reverse();
        Some(path)
    }
}

fn is_context(id: &str) -> bool {
    id == ids::SIZE || id == ids::LANE_FEASIBLE
}

fn topological_order(g: &KnowledgeGraph) -> Vec<String> {
    let mut indegree: BTreeMap<&str, usize> = g.nodes().map(|n| (n.id.as_str(), 0)).collect();
    for e in g.edges() {
        *indegree.get_mut(e.dst.as_str()).expect("validated") += 1;
    }
    let mut queue: VecDeque<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
    let mut order = Vec::with_capacity(g.node_count());
    while let Some(id) = queue.pop_front() {
        order.push(id.to_string());
        for e in g.outgoing(id) {
            let d = indegree.get_mut(e.dst.as_str()).expect("validated");
            *d -= 1;
            if *d == 0 {
                queue.push_back(e.dst.as_str());
            }
        }
    }
    order
}
