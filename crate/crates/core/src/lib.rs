//! Data side of the facial emotion recognition toolkit.
//!
//! Loads FER+, CK+ and KDEF into one harmonized seven-class corpus of 48×48
//! grayscale samples, derives aligned and landmark-masked variants through a
//! pluggable face detector, and provides the on-the-fly augmentation,
//! inverse-frequency sampling and evaluation metrics used by training.

pub mod augment;
pub mod datasets;
pub mod error;
pub mod frame;
pub mod label;
pub mod metrics;
pub mod preprocess;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use frame::{GrayFrame, SIDE};
pub use label::{DatasetId, EmotionLabel, NUM_CLASSES};
