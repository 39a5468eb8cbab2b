//! Training of the emotion classifiers on a split manifest: seeded batch
//! order (shuffled or inverse-frequency sampled), optional RandAugment on
//! training batches, Adam on cross-entropy, early stopping on validation
//! accuracy and best-epoch checkpoints.

mod checkpoint;
mod config;
mod error;
mod eval;
mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use config::{ModelSpec, TrainConfig};
pub use error::{Result, TrainError};
pub use eval::{argmax, evaluate, images_to_tensor, predict, predict_model, Evaluation};
pub use trainer::{epoch_order, train, train_with, write_epoch_logs, EarlyStopping, EpochLog, TrainOutcome};
