//! Obstacle catalog, material property criteria and the layered knowledge
//! graph relating them.

mod attributes;
mod catalog;
mod graph;

pub use attributes::*;
pub use catalog::{catalog, Catalog, CatalogError, Dimensions, ObstacleClass, CATALOG_SIZE};
pub use graph::{
    build_graph, ids, relation, validate_graph, DuplicateNode, KgEdge, KgNode, KnowledgeGraph, Layer, ValidationReport,
    Violation,
};
