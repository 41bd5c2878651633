use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("capacity error: {nodes} nodes requested, cap is {cap}")]
    Capacity { nodes: usize, cap: usize },

    #[error("{op} does not support dimension {dim}")]
    UnsupportedDimension { op: &'static str, dim: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("wrong theorem: {0}")]
    WrongTheorem(String),

    #[error("factorization failed at shift {shift}: {detail}")]
    Factorization { shift: String, detail: String },

    #[error("near-singular system at shift {shift} (condition estimate {condition:.3e})")]
    NearSingular { shift: String, condition: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}
