use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("label {0} is not one of the seven canonical emotions")]
    NonCanonicalLabel(String),

    #[error("duplicate sample ({source_id}, {key}, {variant})")]
    DuplicateSample {
        source_id: String,
        key: String,
        variant: String,
    },

    #[error("invalid split ratios {0:?}: must be non-negative and sum to 1")]
    InvalidRatios([f64; 3]),

    #[error("manifest is empty")]
    EmptyManifest,

    #[error("manifest inconsistency: {0}")]
    Manifest(String),

    #[error("manifest parse error at line {line}: {reason}")]
    ManifestParse { line: usize, reason: String },

    #[error("all class counts are zero")]
    NoSamples,

    #[error("label {0} has no class weight")]
    MissingWeight(String),

    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("label index {0} out of range")]
    LabelOutOfRange(usize),

    #[error("invalid augmentation policy: {0}")]
    InvalidPolicy(String),

    #[error(transparent)]
    Detect(#[from] crate::preprocess::DetectError),

    #[error("sidecar parse error at line {line}: {reason}")]
    Sidecar { line: usize, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
