use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use fer_core::datasets::{load_manifest, ImageSample, Split};
use fer_core::metrics::report;
use fer_experiments::pipeline::{self, StepSummary};
use fer_experiments::runner::{self, results_dir};
use fer_experiments::{render, ExpError, ExperimentConfig, Format, ResultsTable, TableKind};
use fer_nn::Arch;
use fer_train::{evaluate, ModelSpec};

/// Facial emotion recognition experiments.
#[derive(Parser)]
#[command(name = "fer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the configured datasets, merge and split them.
    Ingest {
        #[arg(long)]
        config: PathBuf,
    },
    /// Detect faces and write the aligned and cropped stages.
    Preprocess {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the augmented merged stage (original + aligned + cropped).
    BuildMerged {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train one model on a manifest and evaluate it on its test split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "resnet18")]
        arch: String,
        #[arg(long, value_enum, default_value_t = OnOff::Off)]
        augment: OnOff,
        #[arg(long, value_enum, default_value_t = OnOff::Off)]
        sampler: OnOff,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Take the other training settings from this config's [training].
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run the architecture × stage × flags grid.
    Ablation {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on each source and test on every source.
    Cross {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a results.jsonl file.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// text, json, csv, png or all.
        #[arg(long, default_value = "all")]
        format: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn enabled(self) -> bool {
        matches!(self, OnOff::On)
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_CELLS_FAILED: u8 = 2;

fn print_summary(name: &str, s: &StepSummary) {
    println!("{name}: {} samples", s.samples);
    for (source, n) in &s.per_source {
        println!("  {source}: {n}");
    }
    for (split, n) in &s.splits {
        println!("  {}: {n}", split.as_str());
    }
    if !s.skipped.is_empty() {
        println!("  skipped {}", s.skipped.len());
        for reason in s.skipped.iter().take(10) {
            println!("    {reason}");
        }
    }
}

fn finish_grid(table: &ResultsTable, out: &Path) -> anyhow::Result<u8> {
    render(table, Format::All, out)?;
    print!("{}", fer_experiments::render::grid_text(table));
    println!("results written to {}", out.display());
    let failed = table.failed();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", table.len());
        Ok(EXIT_CELLS_FAILED)
    } else {
        Ok(0)
    }
}

fn train_command(
    manifest: &Path,
    arch: &str,
    augment: bool,
    sampler: bool,
    seed: u64,
    out: &Path,
    config: Option<&Path>,
    epochs: Option<usize>,
) -> anyhow::Result<u8> {
    let arch: Arch = arch.parse().map_err(|e| ExpError::Config(format!("{e}")))?;
    let training = match config {
        Some(path) => ExperimentConfig::load(path)?.training,
        None => Default::default(),
    };
    let mut config = training.train_config(augment, sampler);
    config.seed = seed;
    if let Some(e) = epochs {
        config.epochs = e;
    }
    config.validate().map_err(|e| ExpError::Config(e.to_string()))?;
    let manifest = load_manifest(manifest)
        .and_then(|m| m.validate().map(|_| m))
        .map_err(|e| ExpError::InvalidManifest {
            path: manifest.to_path_buf(),
            reason: e.to_string(),
        })?;
    let spec = ModelSpec::new(arch);
    let checkpoint = runner::train_in_dir(&manifest, &spec, &config, out)?;
    println!(
        "best epoch {} with validation accuracy {:.4}",
        checkpoint.epoch, checkpoint.val_accuracy
    );
    let test: Vec<&ImageSample> = manifest
        .samples()
        .iter()
        .filter(|s| s.split == Split::Test)
        .collect();
    if !test.is_empty() {
        let eval = evaluate(&checkpoint.model()?, &test, config.eval_batch_size)?;
        let rep = report(&eval.confusion)?;
        let text = format!(
            "test accuracy {:.2}%\n{}{}",
            eval.accuracy * 100.0,
            rep.to_text(),
            eval.confusion.to_text()
        );
        print!("{text}");
        let path = out.join("test_report.txt");
        std::fs::write(&path, text).with_context(|| path.display().to_string())?;
    }
    Ok(0)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Ingest { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            print_summary("original", &pipeline::ingest(&cfg)?);
        }
        Command::Preprocess { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (aligned, cropped) = pipeline::preprocess(&cfg)?;
            print_summary("aligned", &aligned);
            print_summary("cropped", &cropped);
        }
        Command::BuildMerged { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            print_summary("augmented_merged", &pipeline::build_merged(&cfg)?);
        }
        Command::Train {
            manifest,
            arch,
            augment,
            sampler,
            seed,
            out,
            config,
            epochs,
        } => {
            return train_command(
                &manifest,
                &arch,
                augment.enabled(),
                sampler.enabled(),
                seed,
                &out,
                config.as_deref(),
                epochs,
            )
        }
        Command::Ablation { config, jobs, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let table = runner::run_ablation_grid(&cfg, jobs)?;
            let out = out.unwrap_or_else(|| results_dir(&cfg, TableKind::Ablation));
            return finish_grid(&table, &out);
        }
        Command::Cross { config, jobs, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let table = runner::run_cross_dataset(&cfg, jobs)?;
            let out = out.unwrap_or_else(|| results_dir(&cfg, TableKind::Cross));
            return finish_grid(&table, &out);
        }
        Command::Report { results, out, format } => {
            let format: Format = format.parse()?;
            let table = ResultsTable::load(&results)?;
            for path in render(&table, format, &out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
