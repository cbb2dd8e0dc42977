//! Line-oriented `KG v1` and `KGSEG v1` text formats.
//!
//! ```text
//! KG v1
//! NODE <id> <layer> <label...>
//! EDGE <src> <dst> <relation>
//! ```
//!
//! Nodes are sorted by id, edges by `(src, dst, relation)`; all NODE lines
//! precede all EDGE lines. Segment files use the header
//! `KGSEG v1 <index> <total>` and add `CUT <src> <dst> <relation>` lines
//! after their internal edges.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::segment::GraphSegment;
use crate::ontology::{validate_graph, KgEdge, KgNode, KnowledgeGraph, Layer, ValidationReport};

pub const GRAPH_HEADER: &str = "KG v1";
pub const SEGMENT_MAGIC: &str = "KGSEG";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Error)]
#[error("graph failed validation:\n{0}")]
pub struct SerializeError(pub ValidationReport);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("missing header")]
    MissingHeader,
    #[error("bad header `{0}`")]
    BadHeader(String),
    #[error("unsupported version `{0}`")]
    UnsupportedVersion(String),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge refers to missing node `{0}`")]
    MissingNode(String),
    #[error("NODE line after EDGE lines")]
    NodeAfterEdge,
    #[error("EDGE line after CUT lines")]
    EdgeAfterCut,
    #[error("cut edge `{0}` must have exactly one endpoint in this segment")]
    BadCut(String),
    #[error("unexpected empty line")]
    EmptyLine,
    #[error("malformed line: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    pub kind: ParseErrorKind,
}

fn write_node(out: &mut String, node: &KgNode) {
    write!(out, "NODE {} {}", node.id, node.layer).unwrap();
    if !node.label.is_empty() {
        out.push(' ');
        out.push_str(&node.label);
    }
    out.push('\n');
}

fn write_edge(out: &mut String, tag: &str, edge: &KgEdge) {
    writeln!(out, "{tag} {} {} {}", edge.src, edge.dst, edge.relation).unwrap();
}

/// Canonical text form of a valid graph.
pub fn serialize(g: &KnowledgeGraph) -> Result<String, SerializeError> {
    let report = validate_graph(g);
    if !report.is_ok() {
        return Err(SerializeError(report));
    }
    let mut out = String::new();
    out.push_str(GRAPH_HEADER);
    out.push('\n');
    for node in g.nodes() {
        write_node(&mut out, node);
    }
    for edge in g.edges() {
        write_edge(&mut out, "EDGE", edge);
    }
    Ok(out)
}

pub fn serialize_segment(seg: &GraphSegment) -> String {
    let mut out = format!("{SEGMENT_MAGIC} {FORMAT_VERSION} {} {}\n", seg.index, seg.total);
    for node in &seg.nodes {
        write_node(&mut out, node);
    }
    for edge in &seg.internal_edges {
        write_edge(&mut out, "EDGE", edge);
    }
    for edge in &seg.cut_edges {
        write_edge(&mut out, "CUT", edge);
    }
    out
}

/// Splits text into numbered lines; only a single trailing newline is allowed.
fn lines(bytes: &[u8]) -> Result<Vec<(usize, &str)>, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ParseError { line: 1, kind: ParseErrorKind::InvalidUtf8 })?;
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(ParseError { line: 1, kind: ParseErrorKind::MissingHeader });
    }
    let out: Vec<_> = body.split('\n').enumerate().map(|(i, l)| (i + 1, l)).collect();
    if let Some(&(line, _)) = out.iter().find(|(_, l)| l.is_empty()) {
        return Err(ParseError { line, kind: ParseErrorKind::EmptyLine });
    }
    Ok(out)
}

fn check_version(line: usize, version: &str) -> Result<(), ParseError> {
    if version == FORMAT_VERSION {
        Ok(())
    } else if version.starts_with('v') {
        Err(ParseError { line, kind: ParseErrorKind::UnsupportedVersion(version.to_string()) })
    } else {
        Err(ParseError { line, kind: ParseErrorKind::BadHeader(version.to_string()) })
    }
}

enum Record {
    Node(KgNode),
    Edge(KgEdge),
    Cut(KgEdge),
}

fn parse_record(text: &str) -> Result<Record, ParseErrorKind> {
    let malformed = || ParseErrorKind::Malformed(text.to_string());
    let mut parts = text.splitn(4, ' ');
    let tag = parts.next().ok_or_else(malformed)?;
    let a = parts.next().filter(|s| !s.is_empty()).ok_or_else(malformed)?;
    let b = parts.next().filter(|s| !s.is_empty()).ok_or_else(malformed)?;
    let tail = parts.next();
    match tag {
        "NODE" => {
            let layer = Layer::from_token(b).ok_or_else(|| ParseErrorKind::UnknownLayer(b.to_string()))?;
            Ok(Record::Node(KgNode { id: a.to_string(), layer, label: tail.unwrap_or("").to_string() }))
        }
        "EDGE" | "CUT" => {
            let rel = tail.filter(|r| !r.is_empty() && !r.contains(char::is_whitespace)).ok_or_else(malformed)?;
            let edge = KgEdge::new(a, b, rel);
            Ok(if tag == "EDGE" { Record::Edge(edge) } else { Record::Cut(edge) })
        }
        _ => Err(malformed()),
    }
}

#[derive(PartialEq, PartialOrd)]
enum Section {
    Nodes,
    Edges,
    Cuts,
}

struct Body {
    nodes: Vec<KgNode>,
    edges: Vec<KgEdge>,
    cuts: Vec<KgEdge>,
}

fn parse_body(lines: &[(usize, &str)], allow_cuts: bool) -> Result<Body, ParseError> {
    let mut body = Body { nodes: vec![], edges: vec![], cuts: vec![] };
    let mut ids = BTreeSet::new();
    let mut section = Section::Nodes;
    for &(line, text) in lines {
        let err = |kind| ParseError { line, kind };
        match parse_record(text).map_err(err)? {
            Record::Node(node) => {
                if section > Section::Nodes {
                    return Err(err(ParseErrorKind::NodeAfterEdge));
                }
                if !ids.insert(node.id.clone()) {
                    return Err(err(ParseErrorKind::DuplicateNode(node.id)));
                }
                body.nodes.push(node);
            }
            Record::Edge(edge) => {
                if section > Section::Edges {
                    return Err(err(ParseErrorKind::EdgeAfterCut));
                }
                section = Section::Edges;
                for end in [&edge.src, &edge.dst] {
                    if !ids.contains(end) {
                        return Err(err(ParseErrorKind::MissingNode(end.clone())));
                    }
                }
                body.edges.push(edge);
            }
            Record::Cut(edge) if allow_cuts => {
                section = Section::Cuts;
                if ids.contains(&edge.src) == ids.contains(&edge.dst) {
                    return Err(err(ParseErrorKind::BadCut(edge.to_string())));
                }
                body.cuts.push(edge);
            }
            Record::Cut(_) => return Err(err(ParseErrorKind::Malformed(text.to_string()))),
        }
    }
    Ok(body)
}

pub fn deserialize(bytes: &[u8]) -> Result<KnowledgeGraph, ParseError> {
    let lines = lines(bytes)?;
    let (line, header) = lines[0];
    match header.split_once(' ') {
        Some(("KG", version)) => check_version(line, version)?,
        _ => return Err(ParseError { line, kind: ParseErrorKind::BadHeader(header.to_string()) }),
    }
    let body = parse_body(&lines[1..], false)?;
    let mut g = KnowledgeGraph::new();
    for node in body.nodes {
        g.add_node(node.id, node.layer, node.label).expect("ids checked while parsing");
    }
    for edge in body.edges {
        g.add_edge(edge);
    }
    Ok(g)
}

pub fn deserialize_segment(bytes: &[u8]) -> Result<GraphSegment, ParseError> {
    let lines = lines(bytes)?;
    let (line, header) = lines[0];
    let bad = || ParseError { line, kind: ParseErrorKind::BadHeader(header.to_string()) };
    let parts: Vec<&str> = header.split(' ').collect();
    let [magic, version, index, total] = parts[..] else {
        return Err(bad());
    };
    if magic != SEGMENT_MAGIC {
        return Err(bad());
    }
    check_version(line, version)?;
    let index: usize = index.parse().map_err(|_| bad())?;
    let total: usize = total.parse().map_err(|_| bad())?;
    if index >= total {
        return Err(bad());
    }
    let mut body = parse_body(&lines[1..], true)?;
    body.nodes.sort_by(|a, b| a.id.cmp(&b.id));
    body.edges.sort();
    body.cuts.sort();
    Ok(GraphSegment { index, total, nodes: body.nodes, internal_edges: body.edges, cut_edges: body.cuts })
}
