use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("class {0} has no training samples; the weighted sampler is undefined")]
    MissingClass(String),
    #[error("pretrained weights are not available for {0}")]
    PretrainedUnavailable(String),
    #[error("image {index} is {width}x{height}, expected 48x48")]
    ImageShape { index: usize, width: usize, height: usize },
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] fer_core::Error),
    #[error(transparent)]
    Model(#[from] fer_nn::NnError),
}

impl TrainError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;
