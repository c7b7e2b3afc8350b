//! Pattern-independent subgraph matching on port graphs.
//!
//! This crate matches a fixed set of pattern port graphs against subject port
//! graphs in a query time that does not grow with the number of patterns. It
//! works in two phases:
//!
//! 1. **Compile** ([`Matcher::compile`](matcher::Matcher::compile)): every
//!    pattern is normalized, rooted, reduced to a canonical tree and encoded
//!    as a tuple of strings. The tuples of all patterns are inserted into
//!    per-width multidimensional prefix trees. The result can be serialized
//!    to disk.
//! 2. **Query** ([`Matcher::find_matches`](matcher::Matcher::find_matches)):
//!    for a subject graph, candidate anchor sets are enumerated around every
//!    edge, the subject strings for each candidate are matched against the
//!    prefix trees, and every hit is reconstructed into an explicit embedding
//!    and verified before being reported.
//!
//! A quantum-circuit frontend ([`circuit`]) converts gate lists to port
//! graphs, and a naive per-pattern matcher ([`matcher::naive_match`]) serves
//! as a baseline and test oracle.

pub mod anchors;
pub mod canon;
pub mod circuit;
pub mod embed;
pub mod format;
pub mod graph;
pub mod matcher;
pub mod normalize;
pub mod path;
pub mod sample;
pub mod trie;

pub use crate::anchors::{all_anchors, g_max, subject_strings, AnchorCandidate};
pub use crate::canon::{
    as_strings, canonical_anchors, ct_representation, reconstruct, rooted_isomorphic,
    CanonicalTree, SplitGraph, StringTuple,
};
pub use crate::embed::{is_convex, verify_embedding, Embedding};
pub use crate::graph::{
    Edge, EdgeId, GraphBuilder, GraphError, PathId, PortGraph, PortLabel, PortState, VertexId,
    Weight,
};
pub use crate::matcher::{naive_match, Match, MatchOptions, Matcher, PatternId};
pub use crate::normalize::{normalize_two_paths, Normalized};
pub use crate::path::{GraphMetrics, LinearPath};

/// Errors shared by the canonical-tree and anchor-enumeration operations.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OpError {
    #[error("graph is not flat (a linear path is a cycle)")]
    NotFlat,
    #[error("graph is not connected")]
    NotConnected,
    #[error("vertex {0:?} is out of range")]
    BadVertex(graph::VertexId),
    #[error("edge {0:?} is out of range")]
    BadEdge(graph::EdgeId),
    #[error("anchor list is not a valid ordered anchor set: {0}")]
    BadAnchors(String),
    #[error("root must lie on exactly one linear path")]
    RootNotOnOnePath,
    #[error("width budget must be at least 1")]
    BadWidth,
    #[error("depth budget must be at least 1")]
    BadDepth,
    #[error("graph has no edges")]
    NoEdges,
    #[error("inconsistent merge labels: {0}")]
    BadMerge(String),
}
