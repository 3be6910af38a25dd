use thiserror::Error;

use crate::graph::VertexId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration schema violation: {0}")]
    Schema(String),

    #[error("self-loop not supported at vertex {0}")]
    SelfLoop(VertexId),

    #[error("duplicate bond between {0} and {1}")]
    DuplicateBond(VertexId, VertexId),

    #[error("duplicate vertex {0}")]
    DuplicateVertex(VertexId),

    #[error("bond {from}-{to} has non-positive length {length}")]
    NonPositiveLength {
        from: VertexId,
        to: VertexId,
        length: f64,
    },

    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),

    #[error("bond {0}-{1} not found")]
    MissingBond(VertexId, VertexId),

    #[error("graph is disconnected: vertex {0} unreachable")]
    Disconnected(VertexId),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling lengths differ for pair {up}/{down}: {a} vs {b}")]
    CouplingLengthMismatch { up: u32, down: u32, a: f64, b: f64 },

    #[error("near bond resonance at k = {k} (bond {bond}), shift k")]
    NearBondResonance { k: f64, bond: usize },

    #[error("scan step {step} too coarse, need step <= {required}")]
    ScanTooCoarse { step: f64, required: f64 },

    #[error("unpaired root at index {index} (k = {k})")]
    UnpairedRoot { index: usize, k: f64 },

    #[error("on-resonance at k = {0}, perturb k")]
    OnResonance(f64),

    #[error("singular resolvent at E = {0}, perturb E")]
    SingularResolvent(f64),

    #[error("matrix invariant violated: {0}")]
    Invariant(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
