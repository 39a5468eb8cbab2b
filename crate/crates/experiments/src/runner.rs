//! Training runs in content-addressed directories, and the ablation and
//! cross-dataset grids built from them.
//!
//! A run directory is named by the hash of everything that determines its
//! result, so a rerun finds and reuses finished checkpoints. Cells run on up
//! to `jobs` worker threads; a failing cell is recorded and the grid goes on.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use fer_core::datasets::{DatasetManifest, ImageSample, Split, TOOLKIT_VERSION};
use fer_core::metrics::{report, ConfusionMatrix};
use fer_nn::Arch;
use fer_train::{evaluate, train_with, write_epoch_logs, Checkpoint, ModelSpec, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Flags, Source, Stage};
use crate::error::{ExpError, Result};
use crate::pipeline::{load_stage, source_subset};
use crate::results::{CellOutcome, CellRecord, CellResult, ResultsTable, TableKind};

pub const CHECKPOINT_FILE: &str = "best.ckpt";
pub const EPOCH_LOG_FILE: &str = "epochs.jsonl";
pub const RUN_FILE: &str = "run.json";

/// Everything that determines a run's checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub toolkit_version: String,
    pub stage: Stage,
    pub train_source: Source,
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub manifest_fingerprint: String,
}

impl RunKey {
    /// First 16 hex digits of the SHA-256 of the key's JSON form.
    pub fn id(&self) -> String {
        let json = serde_json::to_vec(self).expect("run keys serialize");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }
}

/// Trains into `dir`, or reuses a checkpoint already there that was made
/// from the same spec, config and manifest.
pub fn train_in_dir(manifest: &DatasetManifest, spec: &ModelSpec, config: &TrainConfig, dir: &Path) -> Result<Checkpoint> {
    let fingerprint = manifest.fingerprint();
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    if ckpt_path.exists() {
        match Checkpoint::load(&ckpt_path) {
            Ok(c) if c.spec == *spec && c.config == *config && c.manifest_fingerprint == fingerprint => {
                log::info!("reusing {}", ckpt_path.display());
                return Ok(c);
            }
            Ok(_) => log::warn!("{} was made from other inputs; retraining", ckpt_path.display()),
            Err(e) => log::warn!("{e}; retraining"),
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    let label = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let outcome = train_with(manifest, spec, config, |log| {
        log::info!(
            "[{label}] epoch {} train loss {:.4} acc {:.4} val loss {:.4} acc {:.4} ({:.1}s)",
            log.epoch,
            log.train_loss,
            log.train_accuracy,
            log.val_loss,
            log.val_accuracy,
            log.wall_time_s
        );
    })?;
    write_epoch_logs(&dir.join(EPOCH_LOG_FILE), &outcome.logs)?;
    outcome.checkpoint.save(&ckpt_path)?;
    Ok(outcome.checkpoint)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredEval {
    test_fingerprint: String,
    confusion: ConfusionMatrix,
}

/// Test-split confusion of `checkpoint` on `test`, cached in `dir` under the
/// test set's fingerprint.
fn evaluate_in_dir(dir: &Path, checkpoint: &Checkpoint, name: &str, test: &DatasetManifest) -> Result<(ConfusionMatrix, String)> {
    let fingerprint = test.fingerprint();
    let path = dir.join(format!("eval-{name}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(stored) = serde_json::from_str::<StoredEval>(&text) {
            if stored.test_fingerprint == fingerprint {
                return Ok((stored.confusion, fingerprint));
            }
        }
    }
    let samples: Vec<&ImageSample> = test.samples().iter().collect();
    if samples.is_empty() {
        return Err(ExpError::Config(format!("test split of {name} is empty")));
    }
    let model = checkpoint.model()?;
    let eval = evaluate(&model, &samples, checkpoint.config.eval_batch_size)?;
    let stored = StoredEval {
        test_fingerprint: fingerprint.clone(),
        confusion: eval.confusion.clone(),
    };
    let json = serde_json::to_string_pretty(&stored).expect("evaluations serialize");
    std::fs::write(&path, json).map_err(|e| ExpError::io(&path, e))?;
    Ok((eval.confusion, fingerprint))
}

/// One training run and the test sets it is evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub stage: Stage,
    pub train_source: Source,
    pub arch: Arch,
    pub flags: Flags,
    pub tests: Vec<Source>,
    pub table: TableKind,
    pub row: String,
    /// Column label per test source.
    pub columns: Vec<String>,
}

struct Trained {
    run_id: String,
    checkpoint: String,
    manifest_fingerprint: String,
    best_epoch: usize,
    val_accuracy: f64,
    evals: Vec<Result<(ConfusionMatrix, String), String>>,
}

fn run_job(cfg: &ExperimentConfig, job: &Job, stage_manifest: &DatasetManifest) -> Result<Trained> {
    let manifest = source_subset(stage_manifest, job.train_source);
    let spec = ModelSpec::new(job.arch);
    let config = cfg.training.train_config(job.flags.augment, job.flags.sampler);
    let key = RunKey {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        stage: job.stage,
        train_source: job.train_source,
        spec,
        config: config.clone(),
        manifest_fingerprint: manifest.fingerprint(),
    };
    let run_id = key.id();
    let dir = cfg.runs_dir().join(&run_id);
    std::fs::create_dir_all(&dir).map_err(|e| ExpError::io(&dir, e))?;
    let run_file = dir.join(RUN_FILE);
    let json = serde_json::to_string_pretty(&key).expect("run keys serialize");
    std::fs::write(&run_file, json).map_err(|e| ExpError::io(&run_file, e))?;

    log::info!(
        "run {run_id}: {} on {} {} (augment {}, sampler {})",
        job.arch,
        job.train_source,
        job.stage,
        job.flags.augment,
        job.flags.sampler
    );
    let checkpoint = train_in_dir(&manifest, &spec, &config, &dir)?;
    let evals = job
        .tests
        .iter()
        .map(|&src| {
            let test = source_subset(stage_manifest, src).subset(Split::Test);
            evaluate_in_dir(&dir, &checkpoint, src.as_str(), &test).map_err(|e| e.to_string())
        })
        .collect();
    Ok(Trained {
        run_id: run_id.clone(),
        checkpoint: format!("runs/{run_id}/{CHECKPOINT_FILE}"),
        manifest_fingerprint: key.manifest_fingerprint,
        best_epoch: checkpoint.epoch,
        val_accuracy: checkpoint.val_accuracy,
        evals,
    })
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs `jobs` on up to `workers` threads and assembles the table in job
/// order, whatever order the jobs finish in.
pub fn execute(cfg: &ExperimentConfig, jobs: &[Job], workers: usize) -> Result<ResultsTable> {
    let mut manifests: BTreeMap<Stage, DatasetManifest> = BTreeMap::new();
    for job in jobs {
        if !manifests.contains_key(&job.stage) {
            manifests.insert(job.stage, load_stage(cfg, job.stage)?);
        }
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Trained, String>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(job) = jobs.get(i) else { break };
        let outcome = catch_unwind(AssertUnwindSafe(|| run_job(cfg, job, &manifests[&job.stage])))
            .unwrap_or_else(|p| Err(ExpError::Config(format!("run panicked: {}", panic_message(p.as_ref())))))
            .map_err(|e| {
                log::error!("{} on {} {} failed: {e}", job.arch, job.train_source, job.stage);
                e.to_string()
            });
        slots.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
    };
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(worker);
        }
    });
    let slots = slots.into_inner().expect("workers have finished");

    let mut cells = Vec::new();
    for (job, slot) in jobs.iter().zip(slots) {
        let outcome = slot.expect("every job ran");
        for (t, &test_source) in job.tests.iter().enumerate() {
            let cell_outcome = match &outcome {
                Err(e) => CellOutcome::Failed { error: e.clone() },
                Ok(trained) => match &trained.evals[t] {
                    Err(e) => CellOutcome::Failed { error: e.clone() },
                    Ok((confusion, test_fingerprint)) => match report(confusion) {
                        Err(e) => CellOutcome::Failed { error: e.to_string() },
                        Ok(rep) => CellOutcome::Ok(Box::new(CellResult {
                            accuracy: confusion.accuracy(),
                            confusion: confusion.clone(),
                            report: rep,
                            run_id: trained.run_id.clone(),
                            checkpoint: trained.checkpoint.clone(),
                            manifest_fingerprint: trained.manifest_fingerprint.clone(),
                            test_fingerprint: test_fingerprint.clone(),
                            best_epoch: trained.best_epoch,
                            val_accuracy: trained.val_accuracy,
                        })),
                    },
                },
            };
            cells.push(CellRecord {
                table: job.table,
                row: job.row.clone(),
                column: job.columns[t].clone(),
                arch: job.arch,
                stage: job.stage,
                train_source: job.train_source,
                test_source,
                augment: job.flags.augment,
                sampler: job.flags.sampler,
                seed: cfg.training.seed,
                outcome: cell_outcome,
            });
        }
    }
    Ok(ResultsTable { cells })
}

fn flag_column(stage: Stage, flags: Flags) -> String {
    let mut label = stage.as_str().to_string();
    if flags.augment {
        label.push_str("+augment");
    }
    if flags.sampler {
        label.push_str("+sampler");
    }
    label
}

/// One job per architecture × stage × flag combination, in config order.
pub fn plan_ablation(cfg: &ExperimentConfig) -> Result<Vec<Job>> {
    let a = cfg
        .ablation
        .as_ref()
        .ok_or_else(|| ExpError::Config("the config has no [ablation] section".into()))?;
    let mut jobs = Vec::new();
    for &arch in &a.architectures {
        for &stage in &a.stages {
            for &flags in &a.flags {
                jobs.push(Job {
                    stage,
                    train_source: a.train_source,
                    arch,
                    flags,
                    tests: vec![a.test_source],
                    table: TableKind::Ablation,
                    row: arch.as_str().to_string(),
                    columns: vec![flag_column(stage, flags)],
                });
            }
        }
    }
    Ok(jobs)
}

/// One job per training source, each tested on every source.
pub fn plan_cross(cfg: &ExperimentConfig) -> Result<Vec<Job>> {
    let c = cfg
        .cross
        .as_ref()
        .ok_or_else(|| ExpError::Config("the config has no [cross] section".into()))?;
    let flags = Flags {
        augment: c.augment,
        sampler: c.sampler,
    };
    Ok(c.sources
        .iter()
        .map(|&train_source| Job {
            stage: c.stage,
            train_source,
            arch: c.architecture,
            flags,
            tests: c.sources.clone(),
            table: TableKind::Cross,
            row: train_source.as_str().to_string(),
            columns: c.sources.iter().map(|s| s.as_str().to_string()).collect(),
        })
        .collect())
}

pub fn run_ablation_grid(cfg: &ExperimentConfig, workers: usize) -> Result<ResultsTable> {
    execute(cfg, &plan_ablation(cfg)?, workers)
}

pub fn run_cross_dataset(cfg: &ExperimentConfig, workers: usize) -> Result<ResultsTable> {
    execute(cfg, &plan_cross(cfg)?, workers)
}

/// Default output directory of a grid's rendered results.
pub fn results_dir(cfg: &ExperimentConfig, kind: TableKind) -> PathBuf {
    cfg.work_dir.join(match kind {
        TableKind::Ablation => "ablation",
        TableKind::Cross => "cross",
    })
}
