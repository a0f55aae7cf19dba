//! Error type shared by every module in the crate.
//!
//! Errors are split roughly into three groups: malformed inputs (models,
//! parameter tables, tensors), mode limitations of exact arithmetic, and
//! exceptional inputs for which a recovery procedure's preconditions fail.

use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", violations.join("; "))]
    InvalidModel { violations: Vec<String> },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("unknown catalog model `{0}`")]
    UnknownCatalogId(String),

    #[error("state {state} out of range for node {node} (state space size {size})")]
    StateOutOfRange {
        node: NodeId,
        state: usize,
        size: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parameter table for node {node}: {reason}")]
    InvalidCpt { node: NodeId, reason: String },

    #[error("tensor is not a distribution: {0}")]
    InvalidTensor(String),

    #[error("zero-mass slice under conditioning")]
    ZeroMassSlice,

    #[error("division by zero mass in {context}")]
    ZeroMass { context: String },

    #[error("singular matrix in {context}")]
    Singular { context: String },

    #[error("rational arithmetic cannot represent an irrational result in {context}")]
    IrrationalResult { context: String },

    #[error("complex eigenvalues encountered in {context}")]
    ComplexEigenvalues { context: String },

    #[error("precondition `{name}` failed: {witness}")]
    Precondition { name: String, witness: String },

    #[error("exceptional input: {0}")]
    ExceptionalInput(String),

    #[error("edge {0}->{1} is not covered")]
    NotCovered(NodeId, NodeId),

    #[error("models are not Markov equivalent on fixed node labels")]
    NotEquivalent,

    #[error("equivalence-class search supports at most {max} nodes (got {got})")]
    TooManyNodes { max: usize, got: usize },

    #[error("no identification procedure applies to model `{0}`")]
    NoProcedure(String),

    #[error("boundary parameters: {0}")]
    BoundaryParameters(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error describes a failed precondition or exceptional input
    /// (as opposed to a malformed request). The CLI maps this to exit code 2.
    pub fn is_precondition_failure(&self) -> bool {
        !matches!(
            self,
            Error::Parse(_) | Error::Io(_) | Error::UnknownCatalogId(_) | Error::Unsupported(_)
        )
    }
}
