use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config: {0}")]
    Config(String),
    #[error("manifest {path} not found; run `fer {step}` first")]
    MissingManifest { path: PathBuf, step: &'static str },
    #[error("manifest {path} is invalid: {reason}")]
    InvalidManifest { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Results { path: PathBuf, reason: String },
    #[error(transparent)]
    Data(#[from] fer_core::Error),
    #[error(transparent)]
    Train(#[from] fer_train::TrainError),
}

impl ExpError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExpError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Errors caused by the configuration or missing inputs rather than by a
    /// run itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExpError::Config(_) | ExpError::MissingManifest { .. } | ExpError::InvalidManifest { .. }
        )
    }
}

pub type Result<T, E = ExpError> = std::result::Result<T, E>;
