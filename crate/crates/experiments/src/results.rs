//! Results of a grid: one record per (row, column) cell, stored as JSON
//! lines so tables can be re-rendered without rerunning anything.

use std::path::Path;

use fer_core::metrics::{ConfusionMatrix, MetricsReport};
use fer_nn::Arch;
use serde::{Deserialize, Serialize};

use crate::config::{Source, Stage};
use crate::error::{ExpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// Rows are architectures, columns are stage and flag combinations.
    Ablation,
    /// Rows are training sources, columns are test sources.
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub table: TableKind,
    pub row: String,
    pub column: String,
    pub arch: Arch,
    pub stage: Stage,
    pub train_source: Source,
    pub test_source: Source,
    pub augment: bool,
    pub sampler: bool,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok(Box<CellResult>),
    Failed { error: String },
}

/// A finished cell and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Fraction of correct test predictions, `trace / total` of `confusion`.
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
    pub run_id: String,
    /// Relative to the work directory.
    pub checkpoint: String,
    pub manifest_fingerprint: String,
    pub test_fingerprint: String,
    pub best_epoch: usize,
    pub val_accuracy: f64,
}

impl CellRecord {
    pub fn result(&self) -> Option<&CellResult> {
        match &self.outcome {
            CellOutcome::Ok(r) => Some(r),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match &self.outcome {
            CellOutcome::Ok(_) => None,
            CellOutcome::Failed { error } => Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub cells: Vec<CellRecord>,
}

fn first_appearance<'a>(values: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    out
}

impl ResultsTable {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Row labels in order of first appearance.
    pub fn rows(&self) -> Vec<String> {
        first_appearance(self.cells.iter().map(|c| &c.row))
    }

    pub fn columns(&self) -> Vec<String> {
        first_appearance(self.cells.iter().map(|c| &c.column))
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.result().is_none()).count()
    }

    /// Checks that every stored accuracy equals `trace / total` of the
    /// stored confusion matrix.
    pub fn check_accuracies(&self) -> Result<(), String> {
        for c in &self.cells {
            if let Some(r) = c.result() {
                let m = &r.confusion;
                let expected = m.trace() as f64 / m.total() as f64;
                if m.total() == 0 || (r.accuracy - expected).abs() > 1e-9 {
                    return Err(format!(
                        "cell {} / {}: accuracy {} but confusion gives {expected}",
                        c.row, c.column, r.accuracy
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            out.push_str(&serde_json::to_string(c).expect("cell records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let cells = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<Vec<CellRecord>, String>>()?;
        let table = Self { cells };
        table.check_accuracies()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        Self::from_jsonl(&text).map_err(|reason| ExpError::Results {
            path: path.to_path_buf(),
            reason,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use fer_core::metrics::report;

    pub(crate) fn cell(row: &str, column: &str, counts: [[u64; 7]; 7]) -> CellRecord {
        let confusion = ConfusionMatrix::from_counts(counts);
        CellRecord {
            table: TableKind::Cross,
            row: row.into(),
            column: column.into(),
            arch: Arch::Resnet18,
            stage: Stage::Aligned,
            train_source: row.parse().unwrap_or(Source::Merged),
            test_source: column.parse().unwrap_or(Source::Merged),
            augment: true,
            sampler: false,
            seed: 0,
            outcome: CellOutcome::Ok(Box::new(CellResult {
                accuracy: confusion.accuracy(),
                report: report(&confusion).unwrap(),
                confusion,
                run_id: "0123456789abcdef".into(),
                checkpoint: "runs/0123456789abcdef/best.ckpt".into(),
                manifest_fingerprint: "f".repeat(64),
                test_fingerprint: "e".repeat(64),
                best_epoch: 3,
                val_accuracy: 0.5,
            })),
        }
    }

    pub(crate) fn diagonal(n: u64) -> [[u64; 7]; 7] {
        let mut m = [[0; 7]; 7];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = n;
            row[(i + 1) % 7] = 1;
        }
        m
    }

    #[test]
    fn jsonl_round_trip_keeps_every_field() {
        let mut failed = cell("KDEF", "FERPLUS", diagonal(1));
        failed.outcome = CellOutcome::Failed {
            error: "train split is empty".into(),
        };
        let table = ResultsTable {
            cells: vec![cell("KDEF", "KDEF", diagonal(4)), failed],
        };
        let text = table.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"status\":\"failed\""));
        let back = ResultsTable::from_jsonl(&text).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(back.failed(), 1);
        assert_eq!(back.rows(), vec!["KDEF"]);
        assert_eq!(back.columns(), vec!["KDEF", "FERPLUS"]);
    }

    #[test]
    fn inconsistent_accuracy_is_rejected() {
        let mut c = cell("KDEF", "KDEF", diagonal(4));
        if let CellOutcome::Ok(r) = &mut c.outcome {
            r.accuracy += 0.01;
        }
        let table = ResultsTable { cells: vec![c] };
        assert!(table.check_accuracies().is_err());
        assert!(ResultsTable::from_jsonl(&table.to_jsonl()).is_err());
    }
}
