use thiserror::Error;

use crate::netgraph::{LinkId, NodeId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-positive impedance at line {line}")]
    NonPositiveImpedance { line: usize },
    #[error("duplicate link id {0}")]
    DuplicateLink(LinkId),
    #[error("link {0} is a self-loop")]
    SelfLoop(LinkId),
    #[error("unknown link id {0}")]
    UnknownLink(LinkId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid od pair {origin}-{destination}: {msg}")]
    InvalidOd {
        origin: NodeId,
        destination: NodeId,
        msg: String,
    },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("unknown builtin network '{0}'")]
    UnknownBuiltin(String),
    #[error("parameter '{0}' out of range: {1}")]
    BadParameter(String, String),
    #[error("destination {destination} unreachable from origin {origin}")]
    Unreachable {
        origin: NodeId,
        destination: NodeId,
    },
    #[error("degenerate similarity (sigma = 1) for routes {0} and {1}")]
    DegenerateSimilarity(usize, usize),
    #[error("zero difference variance for alternative {0}")]
    ZeroDifferenceVariance(usize),
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
