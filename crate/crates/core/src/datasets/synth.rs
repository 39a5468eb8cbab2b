//! Procedural stand-in for the real corpora: each class is an oriented
//! sinusoidal grating, each sample adds seeded noise and a brightness jitter.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DatasetManifest, ImageSample, Split, Variant};
use crate::frame::{to_u8, GrayFrame, SIDE};
use crate::label::{DatasetId, EmotionLabel, NUM_CLASSES};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub n_per_class: usize,
    pub seed: u64,
    /// Prefix of every `source_key`, so several synthetic corpora can merge.
    pub key_prefix: String,
    /// Grating amplitude around the mean level.
    pub contrast: f64,
    pub mean_level: f64,
    pub noise_sigma: f64,
    /// Phase offset of every grating, in radians.
    pub phase: f64,
}

impl SynthOptions {
    pub fn new(n_per_class: usize, seed: u64) -> Self {
        Self {
            n_per_class,
            seed,
            key_prefix: "synth".into(),
            contrast: 70.0,
            mean_level: 128.0,
            noise_sigma: 20.0,
            phase: 0.0,
        }
    }
}

fn base_pattern(label: EmotionLabel, opts: &SynthOptions) -> Vec<f64> {
    let theta = label.index() as f64 * PI / NUM_CLASSES as f64;
    let freq = 2.0 * PI / 12.0;
    let (s, c) = theta.sin_cos();
    let mut out = Vec::with_capacity(SIDE * SIDE);
    for r in 0..SIDE {
        for col in 0..SIDE {
            let u = col as f64 * c + r as f64 * s;
            out.push(opts.mean_level + opts.contrast * (freq * u + opts.phase).sin());
        }
    }
    out
}

pub fn synth_generate(n_per_class: usize, seed: u64) -> DatasetManifest {
    synth_generate_with(&SynthOptions::new(n_per_class, seed))
}

/// `7 · n_per_class` samples, classes interleaved (`0,1,…,6,0,1,…`).
pub fn synth_generate_with(opts: &SynthOptions) -> DatasetManifest {
    assert!(opts.n_per_class >= 1, "n_per_class must be at least 1");
    let patterns: Vec<Vec<f64>> = EmotionLabel::ALL
        .iter()
        .map(|&l| base_pattern(l, opts))
        .collect();
    let noise = Normal::new(0.0, opts.noise_sigma.max(0.0)).expect("finite sigma");
    let mut samples = Vec::with_capacity(opts.n_per_class * NUM_CLASSES);
    for i in 0..opts.n_per_class {
        for label in EmotionLabel::ALL {
            let index = i * NUM_CLASSES + label.index();
            let mut rng = rng::stream(opts.seed, &[index as u64]);
            let jitter = rng.random_range(-10.0..10.0);
            let base = &patterns[label.index()];
            let data = base
                .iter()
                .map(|&v| to_u8(v + jitter + noise.sample(&mut rng)))
                .collect();
            samples.push(ImageSample {
                pixels: GrayFrame::new(SIDE, SIDE, data).expect("48x48 buffer"),
                label,
                source: DatasetId::Synthetic,
                source_key: format!("{}-{index:06}", opts.key_prefix),
                variant: Variant::Original,
                split: Split::Unassigned,
            });
        }
    }
    DatasetManifest::from_samples(samples).expect("generated keys are unique")
}
