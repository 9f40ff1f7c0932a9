use thiserror::Error;

/// Errors produced anywhere in the factorization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid belief mixture: {0}")]
    BeliefStructure(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error in {file} at line {line}: {msg}")]
    Parse { file: String, line: u64, msg: String },

    #[error("unknown {kind} id `{id}` referenced in {file}")]
    DanglingId { kind: &'static str, id: String, file: String },

    #[error("operation requires {expected} mode")]
    Mode { expected: &'static str },

    #[error("optimizer diverged at iteration {iteration}: loss is {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    /// Stable machine-readable tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Argument(_) => "argument",
            Error::BeliefStructure(_) => "belief_structure",
            Error::Input(_) => "input",
            Error::Parse { .. } => "parse",
            Error::DanglingId { .. } => "dangling_id",
            Error::Mode { .. } => "mode",
            Error::Divergence { .. } => "divergence",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
