//! RandAugment-style on-the-fly augmentation for 48×48 grayscale images.
//!
//! Each image gets `n_ops` operations drawn uniformly with replacement from
//! the pool, applied in sequence at one shared magnitude in `0..=30`. Signed
//! operations flip their direction with probability 1/2.

mod ops;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use ops::apply_op;

use crate::error::{Error, Result};
use crate::frame::GrayFrame;

pub const MAX_MAGNITUDE: u8 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugOp {
    Identity,
    Rotate,
    TranslateX,
    TranslateY,
    ShearX,
    ShearY,
    Brightness,
    Contrast,
    Sharpness,
    Equalize,
    Autocontrast,
    Posterize,
    Solarize,
}

impl AugOp {
    pub const POOL: [AugOp; 13] = [
        AugOp::Identity,
        AugOp::Rotate,
        AugOp::TranslateX,
        AugOp::TranslateY,
        AugOp::ShearX,
        AugOp::ShearY,
        AugOp::Brightness,
        AugOp::Contrast,
        AugOp::Sharpness,
        AugOp::Equalize,
        AugOp::Autocontrast,
        AugOp::Posterize,
        AugOp::Solarize,
    ];

    /// Whether the mapped parameter is negated at random.
    pub fn is_signed(self) -> bool {
        matches!(
            self,
            AugOp::Rotate
                | AugOp::TranslateX
                | AugOp::TranslateY
                | AugOp::ShearX
                | AugOp::ShearY
                | AugOp::Brightness
                | AugOp::Contrast
                | AugOp::Sharpness
        )
    }

    /// Magnitude → parameter table for a 48-pixel image.
    ///
    /// | op | parameter at magnitude m |
    /// |----|--------------------------|
    /// | rotate | 30·m/30 degrees |
    /// | translate_x/y | (150/331)·48·m/30 pixels |
    /// | shear_x/y | 0.3·m/30 (shear factor) |
    /// | brightness/contrast/sharpness | 0.9·m/30 (blend factor is 1 + p) |
    /// | posterize | 8 − round(m/7.5) bits kept |
    /// | solarize | 255·(1 − m/30) threshold |
    /// | identity/equalize/autocontrast | unused (0) |
    pub fn parameter(self, magnitude: u8) -> f64 {
        let m = magnitude.min(MAX_MAGNITUDE) as f64 / MAX_MAGNITUDE as f64;
        match self {
            AugOp::Rotate => 30.0 * m,
            AugOp::TranslateX | AugOp::TranslateY => 150.0 / 331.0 * 48.0 * m,
            AugOp::ShearX | AugOp::ShearY => 0.3 * m,
            AugOp::Brightness | AugOp::Contrast | AugOp::Sharpness => 0.9 * m,
            AugOp::Posterize => 8.0 - (m * 4.0).round(),
            AugOp::Solarize => 255.0 * (1.0 - m),
            AugOp::Identity | AugOp::Equalize | AugOp::Autocontrast => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub n_ops: usize,
    pub magnitude: u8,
    pub op_pool: Vec<AugOp>,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            n_ops: 2,
            magnitude: 9,
            op_pool: AugOp::POOL.to_vec(),
        }
    }
}

impl AugmentPolicy {
    pub fn new(n_ops: usize, magnitude: u8) -> Result<Self> {
        let p = Self {
            n_ops,
            magnitude,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.magnitude > MAX_MAGNITUDE {
            return Err(Error::InvalidPolicy(format!(
                "magnitude {} exceeds {MAX_MAGNITUDE}",
                self.magnitude
            )));
        }
        if self.n_ops > 0 && self.op_pool.is_empty() {
            return Err(Error::InvalidPolicy("empty op pool".into()));
        }
        Ok(())
    }
}

/// Applies the policy to one image. The output depends only on the image,
/// the policy and the generator state.
pub fn rand_augment<R: Rng + ?Sized>(image: &GrayFrame, policy: &AugmentPolicy, rng: &mut R) -> GrayFrame {
    let mut out = image.clone();
    for _ in 0..policy.n_ops {
        let op = policy.op_pool[rng.random_range(0..policy.op_pool.len())];
        let mut param = op.parameter(policy.magnitude);
        if op.is_signed() && rng.random_bool(0.5) {
            param = -param;
        }
        out = apply_op(&out, op, param);
    }
    out
}
