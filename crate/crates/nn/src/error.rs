use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("unknown architecture {0:?}")]
    UnknownArch(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },
    #[error("parameter {name:?}: {reason}")]
    Param { name: String, reason: String },
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
