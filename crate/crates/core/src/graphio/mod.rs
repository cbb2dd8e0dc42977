//! Graph serialization, segmentation and the client-server sync protocol.

pub mod protocol;
mod segment;
mod text;

pub use segment::{reconstruct, segment, GraphSegment, ReconstructError};
pub use text::{
    deserialize, deserialize_segment, serialize, serialize_segment, ParseError, ParseErrorKind, SerializeError,
    GRAPH_HEADER,
};
