//! Inverse-frequency weighted sampling of training indices.
//!
//! Class weights are `weight_c = N / n_c`. Each sample is drawn with
//! probability `weight_c(i) / Σ_j weight_c(j)`, so every non-empty class
//! receives the same total mass. Draws use Vose's alias table.

use rand::Rng;

use crate::error::{Error, Result};
use crate::label::{EmotionLabel, NUM_CLASSES};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    weights: [Option<f64>; NUM_CLASSES],
    counts: [usize; NUM_CLASSES],
    total: usize,
}

impl ClassWeights {
    /// Weight of `label`, `None` when the class had no samples.
    pub fn get(&self, label: EmotionLabel) -> Option<f64> {
        self.weights[label.index()]
    }

    pub fn counts(&self) -> [usize; NUM_CLASSES] {
        self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Present classes in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (EmotionLabel, f64)> + '_ {
        EmotionLabel::ALL
            .iter()
            .filter_map(|&l| self.get(l).map(|w| (l, w)))
    }

    /// All weights multiplied by `factor`; counts unchanged.
    pub fn scaled(&self, factor: f64) -> ClassWeights {
        let mut out = self.clone();
        for w in out.weights.iter_mut().flatten() {
            *w *= factor;
        }
        out
    }
}

pub fn class_weights(counts: &[usize; NUM_CLASSES]) -> Result<ClassWeights> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoSamples);
    }
    let weights = std::array::from_fn(|c| (counts[c] > 0).then(|| total as f64 / counts[c] as f64));
    Ok(ClassWeights {
        weights,
        counts: *counts,
        total,
    })
}

pub fn class_weights_from_labels(labels: &[EmotionLabel]) -> Result<ClassWeights> {
    let mut counts = [0; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    class_weights(&counts)
}

#[derive(Debug, Clone)]
pub struct WeightedSampler {
    probabilities: Vec<f64>,
    accept: Vec<f64>,
    alias: Vec<usize>,
    seed: u64,
}

/// Per-sample probabilities for the given sample labels.
///
/// Computed as class mass over class size, `p_i = (m_c·w_c / S) / m_c`,
/// which equals `w_c / S` and keeps the per-class sums equal when the
/// weights come from the same labels.
pub fn build_sampler(labels: &[EmotionLabel], weights: &ClassWeights, seed: u64) -> Result<WeightedSampler> {
    if labels.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut members = [0usize; NUM_CLASSES];
    for &l in labels {
        if weights.get(l).is_none() {
            return Err(Error::MissingWeight(l.to_string()));
        }
        members[l.index()] += 1;
    }
    let class_total: [f64; NUM_CLASSES] = std::array::from_fn(|c| {
        EmotionLabel::from_index(c)
            .and_then(|l| weights.get(l))
            .map(|w| w * members[c] as f64)
            .unwrap_or(0.0)
    });
    let sum: f64 = class_total.iter().sum();
    let per_sample: [f64; NUM_CLASSES] = std::array::from_fn(|c| {
        if members[c] == 0 {
            0.0
        } else {
            class_total[c] / sum / members[c] as f64
        }
    });
    let probabilities: Vec<f64> = labels.iter().map(|l| per_sample[l.index()]).collect();
    let (accept, alias) = vose(&probabilities);
    Ok(WeightedSampler {
        probabilities,
        accept,
        alias,
        seed,
    })
}

fn vose(p: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = p.len();
    let mut scaled: Vec<f64> = p.iter().map(|&x| x * n as f64).collect();
    let mut alias: Vec<usize> = (0..n).collect();
    let mut small = Vec::new();
    let mut large = Vec::new();
    for (i, &s) in scaled.iter().enumerate() {
        if s < 1.0 {
            small.push(i);
        } else {
            large.push(i);
        }
    }
    while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
        small.pop();
        alias[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if scaled[l] < 1.0 {
            large.pop();
            small.push(l);
        }
    }
    // leftovers are 1 up to rounding
    for i in small.into_iter().chain(large) {
        scaled[i] = 1.0;
    }
    (scaled, alias)
}

impl WeightedSampler {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.accept.len());
        if rng.random::<f64>() < self.accept[i] {
            i
        } else {
            self.alias[i]
        }
    }

    /// `k` i.i.d. draws with replacement.
    pub fn draw<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<usize> {
        (0..k).map(|_| self.draw_one(rng)).collect()
    }

    /// One epoch of draws (`len()` of them) from the sampler's own seed.
    pub fn draw_epoch(&self, epoch: u64) -> Vec<usize> {
        self.draw(self.len(), &mut rng::stream(self.seed, &[epoch]))
    }
}
