use fer_core::augment::AugmentPolicy;
use fer_core::NUM_CLASSES;
use fer_nn::{Arch, Model};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

/// Which backbone to build. Inputs are 48×48 grayscale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub num_classes: usize,
    #[serde(default)]
    pub pretrained: bool,
}

impl ModelSpec {
    pub fn new(arch: Arch) -> Self {
        Self {
            arch,
            num_classes: NUM_CLASSES,
            pretrained: false,
        }
    }

    /// Builds the model with parameters initialized from `seed`.
    pub fn build(&self, seed: u64) -> Result<Model> {
        if self.pretrained {
            return Err(TrainError::PretrainedUnavailable(self.arch.to_string()));
        }
        if self.num_classes != NUM_CLASSES {
            return Err(TrainError::Config(format!(
                "num_classes must be {NUM_CLASSES}, got {}",
                self.num_classes
            )));
        }
        Ok(Model::build(self.arch, self.num_classes, seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// On-the-fly RandAugment of training batches.
    pub augment: bool,
    pub augment_ops: usize,
    pub augment_magnitude: u8,
    /// Inverse-frequency weighted sampling of training batches.
    pub weighted_sampler: bool,
    /// Seed of the sampler draws; defaults to `seed`.
    pub sampler_seed: Option<u64>,
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 64,
            patience: 10,
            seed: 0,
            augment: false,
            augment_ops: 2,
            augment_magnitude: 9,
            weighted_sampler: false,
            sampler_seed: None,
            eval_batch_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(TrainError::Config(m.into()));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return fail("batch sizes must be at least 1");
        }
        if self.patience == 0 {
            return fail("patience must be at least 1");
        }
        self.augment_policy()?;
        Ok(())
    }

    pub fn augment_policy(&self) -> Result<AugmentPolicy> {
        Ok(AugmentPolicy::new(self.augment_ops, self.augment_magnitude)?)
    }

    pub fn sampler_seed(&self) -> u64 {
        self.sampler_seed.unwrap_or(self.seed)
    }
}
