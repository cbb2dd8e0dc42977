//! Partitioning a graph into bounded segments and putting it back together.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::ontology::{KgEdge, KgNode, KnowledgeGraph};

/// One piece of a partitioned graph. A cut edge has exactly one endpoint in
/// this segment and is recorded on both owning segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSegment {
    pub index: usize,
    pub total: usize,
    pub nodes: Vec<KgNode>,
    pub internal_edges: Vec<KgEdge>,
    pub cut_edges: Vec<KgEdge>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("no segments given")]
    Empty,
    #[error("segment {index} claims total {found}, expected {expected}")]
    InconsistentTotal { index: usize, expected: usize, found: usize },
    #[error("segment index {index} out of range for total {total}")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("segment {0} given more than once")]
    DuplicateSegment(usize),
    #[error("missing segment {index} of {total}")]
    MissingSegment { index: usize, total: usize },
    #[error("node `{id}` appears in segments {first} and {second}")]
    DuplicateNode { id: String, first: usize, second: usize },
    #[error("internal edge {edge} of segment {segment} leaves the segment")]
    StrayInternalEdge { segment: usize, edge: KgEdge },
    #[error("cut edge {edge} on segment {segment} does not touch that segment")]
    ForeignCut { segment: usize, edge: KgEdge },
    #[error("cut edge {edge} refers to node `{missing}` owned by no segment")]
    DanglingCut { edge: KgEdge, missing: String },
    #[error("cut edge {edge} recorded {on_src}x on segment {src_segment} but {on_dst}x on segment {dst_segment}")]
    UnpairedCut { edge: KgEdge, src_segment: usize, dst_segment: usize, on_src: usize, on_dst: usize },
}

/// Greedy sorted-id packing into `ceil(|V| / max_nodes)` segments.
///
/// Expects a graph without dangling edges; an edge with a missing endpoint
/// would be recorded on one segment only and fail reconstruction.
pub fn segment(g: &KnowledgeGraph, max_nodes: usize) -> Vec<GraphSegment> {
    assert!(max_nodes >= 1, "max_nodes must be positive");
    let nodes: Vec<&KgNode> = g.nodes().collect();
    let total = nodes.len().div_ceil(max_nodes);
    let owner: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i / max_nodes)).collect();

    let mut segments: Vec<GraphSegment> = nodes
        .chunks(max_nodes)
        .enumerate()
        .map(|(index, chunk)| GraphSegment {
            index,
            total,
            nodes: chunk.iter().map(|&n| n.clone()).collect(),
            internal_edges: vec![],
            cut_edges: vec![],
        })
        .collect();

    for edge in g.edges() {
        let src = owner.get(edge.src.as_str()).copied();
        let dst = owner.get(edge.dst.as_str()).copied();
        match (src, dst) {
            (Some(a), Some(b)) if a == b => segments[a].internal_edges.push(edge.clone()),
            (a, b) => {
                for seg in [a, b].into_iter().flatten() {
                    segments[seg].cut_edges.push(edge.clone());
                }
            }
        }
    }
    segments
}

/// Inverse of [`segment`]. Each cut edge is restored once per matched pair.
pub fn reconstruct(segments: &[GraphSegment]) -> Result<KnowledgeGraph, ReconstructError> {
    let total = segments.first().ok_or(ReconstructError::Empty)?.total;
    let mut by_index: BTreeMap<usize, &GraphSegment> = BTreeMap::new();
    for seg in segments {
        if seg.total != total {
            return Err(ReconstructError::InconsistentTotal { index: seg.index, expected: total, found: seg.total });
        }
        if seg.index >= total {
            return Err(ReconstructError::IndexOutOfRange { index: seg.index, total });
        }
        if by_index.insert(seg.index, seg).is_some() {
            return Err(ReconstructError::DuplicateSegment(seg.index));
        }
    }
    if let Some(index) = (0..total).find(|i| !by_index.contains_key(i)) {
        return Err(ReconstructError::MissingSegment { index, total });
    }

    let mut g = KnowledgeGraph::new();
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (&index, seg) in &by_index {
        for node in &seg.nodes {
            if let Some(&first) = owner.get(node.id.as_str()) {
                return Err(ReconstructError::DuplicateNode { id: node.id.clone(), first, second: index });
            }
            owner.insert(node.id.as_str(), index);
            g.add_node(node.id.clone(), node.layer, node.label.clone()).expect("ownership checked");
        }
    }

    // (edge, segment) -> occurrences
    let mut cuts: BTreeMap<&KgEdge, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&index, seg) in &by_index {
        for edge in &seg.internal_edges {
            let inside = |id: &str| owner.get(id) == Some(&index);
            if !inside(&edge.src) || !inside(&edge.dst) {
                return Err(ReconstructError::StrayInternalEdge { segment: index, edge: edge.clone() });
            }
            g.add_edge(edge.clone());
        }
        for edge in &seg.cut_edges {
            *cuts.entry(edge).or_default().entry(index).or_default() += 1;
        }
    }

    for (edge, counts) in cuts {
        let locate = |id: &String| {
            owner
                .get(id.as_str())
                .copied()
                .ok_or_else(|| ReconstructError::DanglingCut { edge: edge.clone(), missing: id.clone() })
        };
        let src_segment = locate(&edge.src)?;
        let dst_segment = locate(&edge.dst)?;
        if let Some(&segment) = counts.keys().find(|&&s| s != src_segment && s != dst_segment) {
            return Err(ReconstructError::ForeignCut { segment, edge: edge.clone() });
        }
        let on_src = counts.get(&src_segment).copied().unwrap_or(0);
        let on_dst = counts.get(&dst_segment).copied().unwrap_or(0);
        if src_segment == dst_segment || on_src != on_dst {
            return Err(ReconstructError::UnpairedCut { edge: edge.clone(), src_segment, dst_segment, on_src, on_dst });
        }
        for _ in 0..on_src {
            g.add_edge(edge.clone());
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{build_graph, catalog, validate_graph, Layer};

    fn sample() -> KnowledgeGraph {
        build_graph(&catalog())
    }

    #[test]
    fn one_segment_when_it_fits() {
        let g = sample();
        let segs = segment(&g, g.node_count());
        assert_eq!(segs.len(), 1);
        assert!(segs[0].cut_edges.is_empty());
        assert_eq!(segs[0].internal_edges.len(), g.edge_count());
        assert_eq!(reconstruct(&segs).unwrap(), g);
    }

    #[test]
    fn singleton_segments_cut_every_edge() {
        let g = sample();
        let segs = segment(&g, 1);
        assert_eq!(segs.len(), g.node_count());
        assert!(segs.iter().all(|s| s.internal_edges.is_empty() && s.nodes.len() == 1));
        let cut_records: usize = segs.iter().map(|s| s.cut_edges.len()).sum();
        assert_eq!(cut_records, 2 * g.edge_count());
    }

    #[test]
    fn round_trip_for_small_k() {
        let g = sample();
        for k in [1, 2, 5, 10, g.node_count(), g.node_count() + 3] {
            let segs = segment(&g, k);
            assert_eq!(segs.len(), g.node_count().div_ceil(k));
            assert!(segs.iter().all(|s| s.nodes.len() <= k));
            let back = reconstruct(&segs).unwrap();
            assert_eq!(back, g, "k = {k}");
            assert!(validate_graph(&back).is_ok());
        }
    }

    #[test]
    fn parallel_cut_edges_keep_multiplicity() {
        let mut g = KnowledgeGraph::new();
        g.add_node("a", Layer::Input, "a").unwrap();
        g.add_node("b", Layer::Output, "b").unwrap();
        g.connect("a", "b", "r");
        g.connect("a", "b", "r");
        let segs = segment(&g, 1);
        assert_eq!(segs[0].cut_edges.len(), 2);
        assert_eq!(reconstruct(&segs).unwrap(), g);
    }

    #[test]
    fn missing_segment_is_reported() {
        let segs = segment(&sample(), 15);
        assert_eq!(segs.len(), 3);
        let partial = [segs[0].clone(), segs[2].clone()];
        assert_eq!(reconstruct(&partial).unwrap_err(), ReconstructError::MissingSegment { index: 1, total: 3 });
    }

    #[test]
    fn duplicate_node_across_segments() {
        let mut segs = segment(&sample(), 15);
        let stolen = segs[0].nodes[0].clone();
        segs[1].nodes.push(stolen);
        assert!(matches!(reconstruct(&segs).unwrap_err(), ReconstructError::DuplicateNode { first: 0, second: 1, .. }));
    }

    #[test]
    fn one_sided_cut_is_reported() {
        let mut segs = segment(&sample(), 10);
        let seg = segs.iter_mut().find(|s| !s.cut_edges.is_empty()).unwrap();
        seg.cut_edges.remove(0);
        assert!(matches!(reconstruct(&segs).unwrap_err(), ReconstructError::UnpairedCut { .. }));
    }

    #[test]
    fn bookkeeping_errors() {
        assert_eq!(reconstruct(&[]).unwrap_err(), ReconstructError::Empty);
        let segs = segment(&sample(), 20);
        let twice = [segs[0].clone(), segs[0].clone()];
        assert_eq!(reconstruct(&twice).unwrap_err(), ReconstructError::DuplicateSegment(0));
        let mut off = segs.clone();
        off[1].total = 5;
        assert!(matches!(reconstruct(&off).unwrap_err(), ReconstructError::InconsistentTotal { .. }));
    }
}
