use thiserror::Error;

/// Node labels in messages are 1-based, matching the graph and scenario file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} is out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },

    #[error("edge {from}->{to} has weight {weight}; weights must be finite and strictly positive")]
    InvalidWeight { from: usize, to: usize, weight: f64 },

    #[error("edge {from}->{to} is listed more than once")]
    DuplicateEdge { from: usize, to: usize },

    #[error("edge {from}->{to} does not exist")]
    UnknownEdge { from: usize, to: usize },

    #[error("bound q = {q} on node {node} is below its weighted in-degree {in_degree}")]
    BoundViolation { node: usize, q: f64, in_degree: f64 },

    #[error("zero eigenvalue is not simple ({zeros} singular values at tolerance)")]
    NotSimpleZero { zeros: usize },

    #[error("grounded Laplacian block is singular")]
    SingularL0,

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("state left the finite range at t = {time} (|x| = {magnitude:e})")]
    NonFinite { time: f64, magnitude: f64 },

    #[error("weights unidentifiable: sync trajectories have condition number {condition:e}")]
    RankDeficient { condition: f64 },

    #[error("eigenvalue iteration did not converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(
        context: impl Into<String>,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
