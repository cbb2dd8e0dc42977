//! Knowledge-graph world model for static obstacle handling.
//!
//! - [`ontology`]: obstacle catalog, property levels and the layered graph.
//! - [`reasoner`]: graph evaluation into a driving decision with a trace.
//! - [`graphio`]: canonical text format, segmentation and the TCP protocol.
//! - [`simworld`]: deterministic three-lane kinematic trials.
//! - [`harness`]: experiment matrix, table rendering, calibration oracle, CLI.

pub mod graphio;
pub mod harness;
pub mod ontology;
pub mod reasoner;
pub mod simworld;
