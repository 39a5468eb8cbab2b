use fer_core::datasets::ImageSample;
use fer_core::metrics::{confusion_labels, ConfusionMatrix};
use fer_core::{EmotionLabel, GrayFrame, SIDE};
use fer_nn::{softmax_rows, Model, Tensor};

use crate::checkpoint::Checkpoint;
use crate::error::{Result, TrainError};

/// `[n, 1, 48, 48]` tensor with pixels scaled to `v/127.5 − 1`.
pub fn images_to_tensor(images: &[&GrayFrame]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(images.len() * SIDE * SIDE);
    for (index, img) in images.iter().enumerate() {
        if img.width() != SIDE || img.height() != SIDE {
            return Err(TrainError::ImageShape {
                index,
                width: img.width(),
                height: img.height(),
            });
        }
        data.extend(img.data().iter().map(|&v| v as f32 / 127.5 - 1.0));
    }
    Ok(Tensor::new(vec![images.len(), 1, SIDE, SIDE], data)?)
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn label(i: usize) -> EmotionLabel {
    EmotionLabel::from_index(i).expect("7-way head")
}

pub fn predict_model(model: &Model, images: &[&GrayFrame], batch_size: usize) -> Result<Vec<EmotionLabel>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(batch_size.max(1)) {
        let logits = model.logits(images_to_tensor(chunk)?)?;
        out.extend(logits.data().chunks(model.classes()).map(|r| label(argmax(r))));
    }
    Ok(out)
}

/// Labels for canonical 48×48 images using the checkpointed parameters.
pub fn predict(checkpoint: &Checkpoint, images: &[&GrayFrame]) -> Result<Vec<EmotionLabel>> {
    let model = checkpoint.model()?;
    predict_model(&model, images, checkpoint.config.eval_batch_size)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Mean cross-entropy.
    pub loss: f64,
    /// `trace / total` of `confusion`.
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<EmotionLabel>,
}

/// Inference-mode loss, predictions and confusion matrix over `samples`.
pub fn evaluate(model: &Model, samples: &[&ImageSample], batch_size: usize) -> Result<Evaluation> {
    let mut loss = 0f64;
    let mut predictions = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let frames: Vec<&GrayFrame> = chunk.iter().map(|s| &s.pixels).collect();
        let logits = model.logits(images_to_tensor(&frames)?)?;
        for (probs, s) in softmax_rows(&logits).iter().zip(chunk) {
            loss -= probs[s.label.index()].max(f64::MIN_POSITIVE).ln();
        }
        predictions.extend(logits.data().chunks(model.classes()).map(|r| label(argmax(r))));
    }
    let truth: Vec<EmotionLabel> = samples.iter().map(|s| s.label).collect();
    let confusion = confusion_labels(&truth, &predictions)?;
    Ok(Evaluation {
        loss: if samples.is_empty() { 0.0 } else { loss / samples.len() as f64 },
        accuracy: confusion.accuracy(),
        confusion,
        predictions,
    })
}
