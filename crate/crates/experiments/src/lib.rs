//! Config-driven experiments: builds the dataset stages, runs the ablation
//! and cross-dataset grids in content-addressed run directories, and renders
//! result tables, per-class reports and confusion heatmaps.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod render;
pub mod results;
pub mod runner;

pub use config::{ExperimentConfig, Flags, Source, Stage};
pub use error::{ExpError, Result};
pub use render::{render, Format};
pub use results::{CellOutcome, CellRecord, CellResult, ResultsTable, TableKind};
pub use runner::{run_ablation_grid, run_cross_dataset, train_in_dir, RunKey};
