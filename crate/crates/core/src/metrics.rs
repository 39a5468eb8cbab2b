//! Confusion matrix (rows = true label, columns = predicted label) and
//! per-class precision, recall and F1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{EmotionLabel, NUM_CLASSES};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[[u64; NUM_CLASSES]; NUM_CLASSES] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        self.col_sum(c) - self.counts[c][c]
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        self.row_sum(c) - self.counts[c][c]
    }

    pub fn true_negatives(&self, c: usize) -> u64 {
        self.total() - self.row_sum(c) - self.col_sum(c) + self.counts[c][c]
    }

    /// `trace / total`, 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// CSV grid with a header row of predicted labels and a leading column of
    /// true labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for l in EmotionLabel::ALL {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for (l, row) in EmotionLabel::ALL.iter().zip(&self.counts) {
            out.push_str(l.name());
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("rows = true label, columns = predicted label\n");
        write!(out, "{:>9}", "").unwrap();
        for l in EmotionLabel::ALL {
            write!(out, "{:>9}", l.name()).unwrap();
        }
        out.push('\n');
        for (l, row) in EmotionLabel::ALL.iter().zip(&self.counts) {
            write!(out, "{:>9}", l.name()).unwrap();
            for v in row {
                write!(out, "{v:>9}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the matrix from class indices.
pub fn confusion(truth: &[usize], pred: &[usize]) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch(truth.len(), pred.len()));
    }
    let mut m = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= NUM_CLASSES {
            return Err(Error::LabelOutOfRange(t));
        }
        if p >= NUM_CLASSES {
            return Err(Error::LabelOutOfRange(p));
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

pub fn confusion_labels(truth: &[EmotionLabel], pred: &[EmotionLabel]) -> Result<ConfusionMatrix> {
    let t: Vec<_> = truth.iter().map(|l| l.index()).collect();
    let p: Vec<_> = pred.iter().map(|l| l.index()).collect();
    confusion(&t, &p)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: EmotionLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// False when no sample was predicted as this class (precision set to 0).
    pub precision_defined: bool,
    /// False when the class has no true samples (recall set to 0).
    pub recall_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: u64,
}

pub fn report(m: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = m.total();
    if total == 0 {
        return Err(Error::NoSamples);
    }
    let classes = EmotionLabel::ALL
        .iter()
        .map(|&label| {
            let c = label.index();
            let tp = m.true_positives(c) as f64;
            let predicted = m.col_sum(c);
            let support = m.row_sum(c);
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp / support as f64 };
            ClassMetrics {
                label,
                precision,
                recall,
                f1: f1_score(precision, recall),
                support,
                precision_defined: predicted > 0,
                recall_defined: support > 0,
            }
        })
        .collect();
    Ok(MetricsReport {
        classes,
        accuracy: m.accuracy(),
        total,
    })
}

impl MetricsReport {
    /// Aligned per-class table with three decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<10}{:>10}{:>10}{:>10}{:>9}\n",
            "Emotion", "Precision", "Recall", "F1 Score", "Support"
        );
        for c in &self.classes {
            let flag = match (c.precision_defined, c.recall_defined) {
                (true, true) => "",
                _ => " *",
            };
            writeln!(
                out,
                "{:<10}{:>10.3}{:>10.3}{:>10.3}{:>9}{flag}",
                c.label.name(),
                c.precision,
                c.recall,
                c.f1,
                c.support
            )
            .unwrap();
        }
        writeln!(out, "{:<10}{:>10.3}", "Accuracy", self.accuracy).unwrap();
        if self.classes.iter().any(|c| !c.precision_defined || !c.recall_defined) {
            out.push_str("* undefined metric reported as 0\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_predictions() {
        let all: Vec<usize> = (0..7).collect();
        let m = confusion(&all, &all).unwrap();
        assert_eq!(m.trace(), 7);
        let r = report(&m).unwrap();
        assert!(r.classes.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn off_diagonal_pair() {
        let m = confusion(&[0, 0], &[1, 1]).unwrap();
        assert_eq!(m.get(0, 1), 2);
        assert_eq!(m.total(), 2);
        assert_eq!(m.false_negatives(0), 2);
        assert_eq!(m.false_positives(1), 2);
        assert_eq!(m.true_negatives(3), 2);
        let r = report(&m).unwrap();
        assert!(!r.classes[0].precision_defined);
        assert_eq!(r.classes[0].f1, 0.0);
        assert!(r.to_text().contains('*'));
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0], &[]), Err(Error::LengthMismatch(1, 0))));
        assert!(matches!(confusion(&[7], &[0]), Err(Error::LabelOutOfRange(7))));
        assert!(report(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn reference_f1_examples() {
        assert!((f1_score(0.809, 0.758) - 0.782).abs() <= 0.001);
        assert!((f1_score(0.849, 0.816) - 0.832).abs() <= 0.001);
    }

    #[test]
    fn csv_grid_shape() {
        let m = confusion(&[2], &[5]).unwrap();
        let csv = m.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 8);
        assert_eq!(lines[3], "Fear,0,0,0,0,0,1,0");
    }

    fn pairs() -> impl Strategy<Value = Vec<(usize, usize)>> {
        proptest::collection::vec((0usize..7, 0usize..7), 1..300)
    }

    proptest! {
        #[test]
        fn joint_permutation_invariance(p in pairs(), rot in 0usize..300) {
            let (t, q): (Vec<_>, Vec<_>) = p.iter().copied().unzip();
            let mut rotated = p.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            let (t2, q2): (Vec<_>, Vec<_>) = rotated.into_iter().unzip();
            prop_assert_eq!(confusion(&t, &q).unwrap(), confusion(&t2, &q2).unwrap());
        }

        #[test]
        fn micro_average_equals_accuracy(p in pairs()) {
            let (t, q): (Vec<_>, Vec<_>) = p.iter().copied().unzip();
            let m = confusion(&t, &q).unwrap();
            let tp: u64 = (0..7).map(|c| m.true_positives(c)).sum();
            let fp: u64 = (0..7).map(|c| m.false_positives(c)).sum();
            let fn_: u64 = (0..7).map(|c| m.false_negatives(c)).sum();
            let micro_p = tp as f64 / (tp + fp) as f64;
            let micro_r = tp as f64 / (tp + fn_) as f64;
            prop_assert!((micro_p - m.accuracy()).abs() < 1e-12);
            prop_assert!((micro_r - m.accuracy()).abs() < 1e-12);
            let r = report(&m).unwrap();
            for c in &r.classes {
                if c.precision > 0.0 && c.recall > 0.0 {
                    let h = 2.0 / (1.0 / c.precision + 1.0 / c.recall);
                    prop_assert!((c.f1 - h).abs() < 1e-12);
                }
                prop_assert!((0.0..=1.0).contains(&c.f1));
            }
        }

        #[test]
        fn accuracy_between_recalls_for_equal_support(per_class in 1usize..20, preds in proptest::collection::vec(0usize..7, 140)) {
            let t: Vec<usize> = (0..7 * per_class).map(|i| i % 7).collect();
            let q: Vec<usize> = (0..t.len()).map(|i| preds[i % preds.len()]).collect();
            let r = report(&confusion(&t, &q).unwrap()).unwrap();
            let lo = r.classes.iter().map(|c| c.recall).fold(f64::INFINITY, f64::min);
            let hi = r.classes.iter().map(|c| c.recall).fold(0.0, f64::max);
            prop_assert!(r.accuracy >= lo - 1e-12 && r.accuracy <= hi + 1e-12);
        }
    }
}
