use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A graph document violated the schema. `path` points at the offending
    /// element, e.g. `influences[3].target`.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    /// Structural controllability is undefined for factors with internal
    /// dynamics. Carries the sorted ids of the looping factors.
    #[error("self-loops present on {}", .0.join(", "))]
    SelfLoopPresent(Vec<String>),

    #[error("graph has no factors")]
    EmptyGraph,

    #[error("configuration has no members")]
    EmptyConfig,

    #[error("unknown factor id {0:?}")]
    UnknownFactor(String),

    #[error("oracle limited to {max} nodes, got {actual}")]
    SizeGuard { max: usize, actual: usize },

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable code, shared by the CLI and the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "SCHEMA",
            Error::SelfLoopPresent(_) => "SELF_LOOPS",
            Error::EmptyGraph => "EMPTY_GRAPH",
            Error::EmptyConfig => "EMPTY_CONFIG",
            Error::UnknownFactor(_) => "UNKNOWN_FACTOR",
            Error::SizeGuard { .. } => "SIZE_GUARD",
            Error::NonFinite { .. } => "NON_FINITE",
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::Io(_) => "IO",
        }
    }
}
