use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use fer_core::augment::rand_augment;
use fer_core::datasets::{DatasetManifest, ImageSample, Split};
use fer_core::rng::stream;
use fer_core::sampling::{build_sampler, class_weights_from_labels, WeightedSampler};
use fer_core::{EmotionLabel, GrayFrame};
use fer_nn::{Adam, Graph, Mode};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{ModelSpec, TrainConfig};
use crate::error::{Result, TrainError};
use crate::eval::{argmax, evaluate, images_to_tensor};

const SHUFFLE_STREAM: u64 = 1;
const SAMPLER_STREAM: u64 = 2;
const AUGMENT_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub wall_time_s: f64,
}

/// Tracks the best validation accuracy; a strictly higher value counts as
/// an improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records one epoch and reports whether it improved on the best.
    pub fn observe(&mut self, epoch: usize, accuracy: f64) -> bool {
        if self.best.is_none_or(|b| accuracy > b) {
            self.best = Some(accuracy);
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best.map(|b| (self.best_epoch, b))
    }
}

/// Positions into the training split visited in `epoch` (0-based): a seeded
/// permutation, or `len` weighted draws with replacement when a sampler is
/// given.
pub fn epoch_order(len: usize, config: &TrainConfig, sampler: Option<&WeightedSampler>, epoch: usize) -> Vec<usize> {
    match sampler {
        Some(s) => s.draw(len, &mut stream(config.sampler_seed(), &[SAMPLER_STREAM, epoch as u64])),
        None => {
            let mut order: Vec<usize> = (0..len).collect();
            order.shuffle(&mut stream(config.seed, &[SHUFFLE_STREAM, epoch as u64]));
            order
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub logs: Vec<EpochLog>,
    pub stopped_early: bool,
}

pub fn train(manifest: &DatasetManifest, spec: &ModelSpec, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(manifest, spec, config, |_| {})
}

/// Like [`train`], calling `on_epoch` after every completed epoch.
pub fn train_with(
    manifest: &DatasetManifest,
    spec: &ModelSpec,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    let policy = config.augment_policy()?;
    let samples = manifest.samples();
    let train_idx = manifest.indices(Split::Train);
    let val: Vec<&ImageSample> = manifest.indices(Split::Val).into_iter().map(|i| &samples[i]).collect();
    if train_idx.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit("val"));
    }
    let train_labels: Vec<EmotionLabel> = train_idx.iter().map(|&i| samples[i].label).collect();
    let sampler = if config.weighted_sampler {
        if let Some(missing) = EmotionLabel::ALL.iter().find(|l| !train_labels.contains(l)) {
            return Err(TrainError::MissingClass(missing.to_string()));
        }
        let weights = class_weights_from_labels(&train_labels)?;
        Some(build_sampler(&train_labels, &weights, config.sampler_seed())?)
    } else {
        None
    };

    let mut model = spec.build(config.seed)?;
    let mut adam = Adam::new(config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best: Option<Checkpoint> = None;
    let mut logs = Vec::new();
    let fingerprint = manifest.fingerprint();
    log::info!(
        "training {} on {} samples ({} val), augment={} sampler={}",
        spec.arch,
        train_idx.len(),
        val.len(),
        config.augment,
        config.weighted_sampler
    );

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let order = epoch_order(train_idx.len(), config, sampler.as_ref(), epoch);
        let mut loss_sum = 0f64;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let augmented: Vec<GrayFrame>;
            let frames: Vec<&GrayFrame> = if config.augment {
                augmented = batch
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| {
                        let position = (b * config.batch_size + j) as u64;
                        let mut rng = stream(config.seed, &[AUGMENT_STREAM, epoch as u64, position]);
                        rand_augment(&samples[train_idx[p]].pixels, &policy, &mut rng)
                    })
                    .collect();
                augmented.iter().collect()
            } else {
                batch.iter().map(|&p| &samples[train_idx[p]].pixels).collect()
            };
            let labels: Vec<usize> = batch.iter().map(|&p| train_labels[p].index()).collect();
            let mut g = Graph::new(model.params(), Mode::Train);
            let x = g.input(images_to_tensor(&frames)?);
            let logits = model.forward(&mut g, x);
            let loss = g.cross_entropy(logits, &labels);
            loss_sum += g.value(loss).data()[0] as f64 * batch.len() as f64;
            correct += g
                .value(logits)
                .data()
                .chunks(model.classes())
                .zip(&labels)
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            let (grads, stats) = g.backward(loss);
            adam.step(model.params_mut(), &grads);
            model.params_mut().apply_stat_updates(&stats);
        }
        let eval = evaluate(&model, &val, config.eval_batch_size)?;
        let entry = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / order.len() as f64,
            train_accuracy: correct as f64 / order.len() as f64,
            val_loss: eval.loss,
            val_accuracy: eval.accuracy,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {}: train loss {:.4} acc {:.4}, val loss {:.4} acc {:.4} ({:.1}s)",
            entry.epoch,
            entry.train_loss,
            entry.train_accuracy,
            entry.val_loss,
            entry.val_accuracy,
            entry.wall_time_s
        );
        if stopper.observe(entry.epoch, entry.val_accuracy) {
            best = Some(Checkpoint::from_model(
                &model,
                *spec,
                entry.epoch,
                entry.val_accuracy,
                config.clone(),
                fingerprint.clone(),
            ));
        }
        on_epoch(&entry);
        logs.push(entry);
        if stopper.should_stop() {
            break;
        }
    }
    let stopped_early = logs.len() < config.epochs;
    Ok(TrainOutcome {
        checkpoint: best.expect("at least one epoch ran"),
        logs,
        stopped_early,
    })
}

/// One JSON object per line.
pub fn write_epoch_logs(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| TrainError::io(path, e))?;
    for entry in logs {
        let line = serde_json::to_string(entry).expect("log serializes");
        writeln!(f, "{line}").map_err(|e| TrainError::io(path, e))?;
    }
    Ok(())
}
