//! Layered, relation-labeled knowledge graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use super::attributes::*;
use super::catalog::Catalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Input,
    Property,
    Risk,
    Output,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Input, Layer::Property, Layer::Risk, Layer::Output];

    /// Position in the `Input < Property < Risk < Output` order.
    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn token(self) -> &'static str {
        match self {
            Layer::Input => "input",
            Layer::Property => "property",
            Layer::Risk => "risk",
            Layer::Output => "output",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Layer::ALL.into_iter().find(|l| l.token() == token)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KgNode {
    pub id: String,
    pub layer: Layer,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KgEdge {
    pub src: String,
    pub dst: String,
    pub relation: String,
}

impl KgEdge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, relation: impl Into<String>) -> Self {
        Self { src: src.into(), dst: dst.into(), relation: relation.into() }
    }
}

impl fmt::Display for KgEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -[{}]-> {}", self.src, self.relation, self.dst)
    }
}

/// Node id scheme shared by the builder, the reasoner and the wire format.
pub mod ids {
    use super::Attribute;

    pub const SIZE: &str = "in:size";
    pub const LANE_FEASIBLE: &str = "in:lane_feasible";

    pub const IMPULSE_HIGH: &str = "risk:impulse_high";
    pub const IMPULSE_LOW: &str = "risk:impulse_low";
    pub const RIGID_OBSTRUCTION: &str = "risk:rigid_obstruction";
    pub const CLEARABLE: &str = "risk:clearable";
    pub const HAZARD: &str = "risk:hazard";
    pub const NO_HAZARD: &str = "risk:no_hazard";
    pub const SUDDEN_BRAKE_CONDITION: &str = "risk:sudden_brake_condition";
    pub const LANE_OPEN: &str = "risk:lane_open";
    pub const LANE_BLOCKED: &str = "risk:lane_blocked";

    pub const OUT_LANE_CHANGE: &str = "out:lane_change";
    pub const OUT_SUDDEN_BRAKING: &str = "out:sudden_braking";
    pub const OUT_DRIVE_THROUGH: &str = "out:drive_through";

    pub fn obstacle(id: &str) -> String {
        format!("in:{id}")
    }

    pub fn property(family: &str, level: &str) -> String {
        format!("prop:{family}:{level}")
    }

    pub fn level<A: Attribute>(level: A) -> String {
        property(A::FAMILY, level.token())
    }
}

/// Edge relation labels. Gate semantics used by the reasoner are noted.
pub mod relation {
    /// Input obstacle to one of its stored attribute levels: `has_<family>`.
    pub const HAS_PREFIX: &str = "has_";
    /// OR-gate into the destination.
    pub const IMPLIES: &str = "implies";
    /// AND-gate into the destination.
    pub const REQUIRES: &str = "requires";
    /// Malleability evidence checked against the derived impulse.
    pub const CROSS_VALIDATES: &str = "cross_validates";
    /// Common-tendency link between properties. Not gating.
    pub const CORRELATES: &str = "correlates";
    /// Obstacle size input to its pass-under levels. Not gating.
    pub const DETERMINES: &str = "determines";
    /// Context flag to its true/false risk node.
    pub const IF_TRUE: &str = "if_true";
    pub const IF_FALSE: &str = "if_false";
    /// Enabling condition for an action, AND-ed like `requires`.
    pub const ENABLES: &str = "enables";
    /// Default route into the drive-through output.
    pub const FALLBACK: &str = "fallback";

    pub fn has(family: &str) -> String {
        format!("{HAS_PREFIX}{family}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("duplicate node id `{0}`")]
pub struct DuplicateNode(pub String);

/// Directed labeled multigraph. Nodes are keyed by id; edges are kept sorted,
/// so derived equality is structural equality.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, KgNode>,
    edges: Vec<KgEdge>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        layer: Layer,
        label: impl Into<String>,
    ) -> Result<(), DuplicateNode> {
        let id = id.into();
        if self.nodes.contains_key(&id) {
            return Err(DuplicateNode(id));
        }
        self.nodes.insert(id.clone(), KgNode { id, layer, label: label.into() });
        Ok(())
    }

    /// Adds an edge without checking endpoints; see [`validate_graph`].
    pub fn add_edge(&mut self, edge: KgEdge) {
        let at = self.edges.partition_point(|e| e <= &edge);
        self.edges.insert(at, edge);
    }

    pub fn connect(&mut self, src: &str, dst: &str, relation: &str) {
        self.add_edge(KgEdge::new(src, dst, relation));
    }

    pub fn node(&self, id: &str) -> Option<&KgNode> {
        self.nodes.get(id)
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &KgNode> {
        self.nodes.values()
    }

    /// Edges in `(src, dst, relation)` order.
    pub fn edges(&self) -> &[KgEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes_in(&self, layer: Layer) -> impl Iterator<Item = &KgNode> {
        self.nodes.values().filter(move |n| n.layer == layer)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a KgEdge> {
        let start = self.edges.partition_point(|e| e.src.as_str() < id);
        self.edges[start..].iter().take_while(move |e| e.src == id)
    }

    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a KgEdge> {
        self.edges.iter().filter(move |e| e.dst == id)
    }

    pub fn has_edge(&self, src: &str, dst: &str) -> bool {
        self.outgoing(src).any(|e| e.dst == dst)
    }
}

/// One broken [`KnowledgeGraph`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DanglingEdge { edge: KgEdge, missing: String },
    SelfLoop { edge: KgEdge },
    LayerOrder { edge: KgEdge, src_layer: Layer, dst_layer: Layer },
    Cycle { nodes: Vec<String> },
    UnreachableOutput { node: String },
    MalformedToken { item: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingEdge { edge, missing } => {
                write!(f, "dangling edge: {edge} refers to missing node `{missing}`")
            }
            Violation::SelfLoop { edge } => write!(f, "self loop: {edge}"),
            Violation::LayerOrder { edge, src_layer, dst_layer } => {
                write!(f, "layer order: {edge} goes from {src_layer} to {dst_layer}")
            }
            Violation::Cycle { nodes } => write!(f, "cycle: through {}", nodes.join(", ")),
            Violation::UnreachableOutput { node } => {
                write!(f, "unreachable output: `{node}` has no path from an input node")
            }
            Violation::MalformedToken { item } => {
                write!(f, "malformed token: {item} (ids and relations must be non-empty without whitespace, labels single-line)")
            }
        }
    }
}

/// Result of [`validate_graph`]; violations are data, not errors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

/// Checks layering, acyclicity, dangling edges, self loops, output
/// reachability and token well-formedness.
pub fn validate_graph(g: &KnowledgeGraph) -> ValidationReport {
    let mut violations = Vec::new();

    for node in g.nodes() {
        if !is_token(&node.id) || node.label.contains(['\n', '\r']) {
            violations.push(Violation::MalformedToken { item: format!("node `{}`", node.id) });
        }
    }

    let mut sound = Vec::new();
    for edge in g.edges() {
        if !is_token(&edge.relation) {
            violations.push(Violation::MalformedToken { item: format!("relation on {edge}") });
        }
        let mut dangling = false;
        for end in [&edge.src, &edge.dst] {
            if !g.contains_node(end) {
                violations.push(Violation::DanglingEdge { edge: edge.clone(), missing: end.clone() });
                dangling = true;
                if edge.src == edge.dst {
                    break;
                }
            }
        }
        if dangling {
            continue;
        }
        if edge.src == edge.dst {
            violations.push(Violation::SelfLoop { edge: edge.clone() });
            continue;
        }
        let src_layer = g.nodes[&edge.src].layer;
        let dst_layer = g.nodes[&edge.dst].layer;
        if src_layer.rank() > dst_layer.rank() {
            violations.push(Violation::LayerOrder { edge: edge.clone(), src_layer, dst_layer });
        }
        sound.push(edge);
    }

    // Kahn's algorithm over the edges with both ends present.
    let mut indegree: BTreeMap<&str, usize> = g.nodes.keys().map(|k| (k.as_str(), 0)).collect();
    for e in &sound {
        *indegree.get_mut(e.dst.as_str()).unwrap() += 1;
    }
    let mut queue: VecDeque<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
    let mut removed = 0;
    while let Some(id) = queue.pop_front() {
        removed += 1;
        for e in g.outgoing(id) {
            if let Some(d) = indegree.get_mut(e.dst.as_str()) {
                if e.src != e.dst {
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(e.dst.as_str());
                    }
                }
            }
        }
    }
    if removed < g.node_count() {
        let nodes = indegree.into_iter().filter(|&(_, d)| d > 0).map(|(k, _)| k.to_string()).collect();
        violations.push(Violation::Cycle { nodes });
    }

    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut stack: Vec<&str> = g.nodes_in(Layer::Input).map(|n| n.id.as_str()).collect();
    while let Some(id) = stack.pop() {
        if reached.insert(id) {
            stack.extend(g.outgoing(id).filter(|e| g.contains_node(&e.dst)).map(|e| e.dst.as_str()));
        }
    }
    for out in g.nodes_in(Layer::Output) {
        if !reached.contains(out.id.as_str()) {
            violations.push(Violation::UnreachableOutput { node: out.id.clone() });
        }
    }

    ValidationReport { violations }
}

fn add_family<A: Attribute>(g: &mut KnowledgeGraph, label: &str) {
    for level in A::LEVELS {
        g.add_node(ids::level(level), Layer::Property, format!("{label}: {}", level.token().replace('_', " ")))
            .expect("fresh property node");
    }
}

/// Builds the layered obstacle knowledge graph for a catalog.
pub fn build_graph(catalog: &Catalog) -> KnowledgeGraph {
    use relation::*;

    let mut g = KnowledgeGraph::new();
    let node = |g: &mut KnowledgeGraph, id: &str, layer, label: &str| {
        g.add_node(id, layer, label).expect("fresh node");
    };

    for obstacle in catalog {
        node(&mut g, &ids::obstacle(&obstacle.id), Layer::Input, &obstacle.display_name);
    }
    node(&mut g, ids::SIZE, Layer::Input, "obstacle size");
    node(&mut g, ids::LANE_FEASIBLE, Layer::Input, "lane change feasible");

    add_family::<MassClass>(&mut g, "expected mass");
    add_family::<MalleabilityClass>(&mut g, "malleability");
    add_family::<PassUnderClass>(&mut g, "pass under car");
    add_family::<DensityClass>(&mut g, "expected density");
    add_family::<ElasticityClass>(&mut g, "elasticity");
    add_family::<UndersideRiskClass>(&mut g, "underside/tire damage risk");

    node(&mut g, ids::IMPULSE_HIGH, Layer::Risk, "expected impulse after collision: high");
    node(&mut g, ids::IMPULSE_LOW, Layer::Risk, "expected impulse after collision: low");
    node(&mut g, ids::RIGID_OBSTRUCTION, Layer::Risk, "rigid obstruction");
    node(&mut g, ids::CLEARABLE, Layer::Risk, "clearable or deformable");
    node(&mut g, ids::HAZARD, Layer::Risk, "collision hazard");
    node(&mut g, ids::NO_HAZARD, Layer::Risk, "no collision hazard");
    node(&mut g, ids::SUDDEN_BRAKE_CONDITION, Layer::Risk, "sudden brake condition");
    node(&mut g, ids::LANE_OPEN, Layer::Risk, "able to change lane");
    node(&mut g, ids::LANE_BLOCKED, Layer::Risk, "unable to change lane");

    node(&mut g, ids::OUT_LANE_CHANGE, Layer::Output, "lane change");
    node(&mut g, ids::OUT_SUDDEN_BRAKING, Layer::Output, "sudden braking");
    node(&mut g, ids::OUT_DRIVE_THROUGH, Layer::Output, "drive through");

    for obstacle in catalog {
        let input = ids::obstacle(&obstacle.id);
        for (family, level) in obstacle.valuation.levels() {
            g.connect(&input, &ids::property(family, level), &has(family));
        }
    }
    for level in PassUnderClass::LEVELS {
        g.connect(ids::SIZE, &ids::level(level), DETERMINES);
    }

    // Expected impulse from mass and density, cross-validated by malleability.
    g.connect(&ids::level(MassClass::Heavy), ids::IMPULSE_HIGH, IMPLIES);
    g.connect(&ids::level(DensityClass::High), ids::IMPULSE_HIGH, IMPLIES);
    g.connect(&ids::level(MassClass::Light), ids::IMPULSE_LOW, REQUIRES);
    g.connect(&ids::level(DensityClass::Low), ids::IMPULSE_LOW, REQUIRES);
    g.connect(&ids::level(MalleabilityClass::Low), ids::IMPULSE_HIGH, CROSS_VALIDATES);
    g.connect(&ids::level(MalleabilityClass::High), ids::IMPULSE_LOW, CROSS_VALIDATES);

    g.connect(&ids::level(MalleabilityClass::High), &ids::level(DensityClass::Low), CORRELATES);
    g.connect(&ids::level(ElasticityClass::High), &ids::level(UndersideRiskClass::High), CORRELATES);

    g.connect(&ids::level(PassUnderClass::CannotPass), ids::RIGID_OBSTRUCTION, REQUIRES);
    g.connect(&ids::level(MalleabilityClass::Low), ids::RIGID_OBSTRUCTION, REQUIRES);
    g.connect(&ids::level(PassUnderClass::CanPass), ids::CLEARABLE, IMPLIES);
    g.connect(&ids::level(MalleabilityClass::High), ids::CLEARABLE, IMPLIES);

    g.connect(ids::RIGID_OBSTRUCTION, ids::HAZARD, IMPLIES);
    g.connect(&ids::level(UndersideRiskClass::High), ids::HAZARD, IMPLIES);
    g.connect(ids::IMPULSE_HIGH, ids::HAZARD, IMPLIES);

    g.connect(ids::IMPULSE_LOW, ids::NO_HAZARD, REQUIRES);
    g.connect(&ids::level(UndersideRiskClass::Low), ids::NO_HAZARD, REQUIRES);
    g.connect(ids::CLEARABLE, ids::NO_HAZARD, REQUIRES);

    g.connect(&ids::level(PassUnderClass::CannotPass), ids::SUDDEN_BRAKE_CONDITION, REQUIRES);
    g.connect(&ids::level(UndersideRiskClass::High), ids::SUDDEN_BRAKE_CONDITION, REQUIRES);

    g.connect(ids::LANE_FEASIBLE, ids::LANE_OPEN, IF_TRUE);
    g.connect(ids::LANE_FEASIBLE, ids::LANE_BLOCKED, IF_FALSE);

    g.connect(ids::HAZARD, ids::OUT_LANE_CHANGE, REQUIRES);
    g.connect(ids::LANE_OPEN, ids::OUT_LANE_CHANGE, ENABLES);
    g.connect(ids::SUDDEN_BRAKE_CONDITION, ids::OUT_SUDDEN_BRAKING, REQUIRES);
    g.connect(ids::LANE_BLOCKED, ids::OUT_SUDDEN_BRAKING, ENABLES);
    g.connect(ids::NO_HAZARD, ids::OUT_DRIVE_THROUGH, IMPLIES);
    g.connect(ids::HAZARD, ids::OUT_DRIVE_THROUGH, FALLBACK);

    g
}
