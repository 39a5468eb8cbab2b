//! The dataset steps: ingest (load, harmonize, merge, split), preprocess
//! (detect, align, mask) and build-merged (original + aligned + cropped).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fer_core::datasets::{
    load_ckplus, load_ferplus, load_kdef, load_manifest, merge, save_manifest, split, standardize_all,
    synth_generate_with, DatasetManifest, LoadOutcome, Split, SynthOptions, VotePolicy,
};
use fer_core::preprocess::{
    build_augmented_merged, derive_variants, BoundingBox, DetectError, DetectRequest, DetectionCache,
    ExternalDetector, FaceDetection, FaceDetector, FixtureDetector, LandmarkSet, Point,
};
use fer_core::DatasetId;

use crate::config::{DetectorConfig, ExperimentConfig, Source, Stage};
use crate::error::{ExpError, Result};

/// Counts written by a dataset step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepSummary {
    pub samples: usize,
    pub per_source: BTreeMap<DatasetId, usize>,
    pub splits: BTreeMap<Split, usize>,
    /// Records or samples skipped, with the reason.
    pub skipped: Vec<String>,
}

impl StepSummary {
    fn of(manifest: &DatasetManifest, skipped: Vec<String>) -> Self {
        let mut per_source = BTreeMap::new();
        for s in manifest.samples() {
            *per_source.entry(s.source).or_insert(0) += 1;
        }
        Self {
            samples: manifest.len(),
            per_source,
            splits: manifest.split_sizes(),
            skipped,
        }
    }
}

fn retag(manifest: DatasetManifest, id: DatasetId) -> Result<DatasetManifest> {
    let samples = manifest
        .into_samples()
        .into_iter()
        .map(|mut s| {
            s.source = id;
            s
        })
        .collect();
    Ok(DatasetManifest::from_samples(samples)?)
}

fn harmonize(outcome: LoadOutcome, skipped: &mut Vec<String>) -> Result<DatasetManifest> {
    skipped.extend(outcome.issues.iter().map(ToString::to_string));
    Ok(DatasetManifest::from_samples(standardize_all(&outcome.records)?)?)
}

/// Loads every configured source, merges them and assigns one group-aware
/// split to the merged corpus. Writes the `original` stage manifest.
pub fn ingest(cfg: &ExperimentConfig) -> Result<StepSummary> {
    let d = &cfg.datasets;
    let mut parts = Vec::new();
    let mut skipped = Vec::new();
    if let Some(csv) = &d.ferplus_csv {
        let path = cfg.data_path(csv);
        log::info!("loading FER+ from {}", path.display());
        parts.push(harmonize(load_ferplus(&path, VotePolicy::Majority)?, &mut skipped)?);
    }
    if let Some(dir) = &d.ckplus_dir {
        let path = cfg.data_path(dir);
        log::info!("loading CK+ from {}", path.display());
        parts.push(harmonize(load_ckplus(&path)?, &mut skipped)?);
    }
    if let Some(dir) = &d.kdef_dir {
        let path = cfg.data_path(dir);
        log::info!("loading KDEF from {}", path.display());
        let poses: BTreeSet<String> = d.kdef_poses.iter().cloned().collect();
        parts.push(harmonize(load_kdef(&path, &poses)?, &mut skipped)?);
    }
    for (i, s) in d.synthetic.iter().enumerate() {
        let opts = SynthOptions {
            n_per_class: s.n_per_class,
            seed: s.seed,
            key_prefix: format!("synth{i}"),
            contrast: s.contrast,
            mean_level: s.mean_level,
            noise_sigma: s.noise_sigma,
            phase: s.phase,
        };
        let id = s.source.dataset().expect("validated: synthetic sources are single datasets");
        parts.push(retag(synth_generate_with(&opts), id)?);
    }
    if parts.is_empty() {
        return Err(ExpError::Config("no datasets configured".into()));
    }
    let merged = merge(&parts)?;
    if merged.is_empty() {
        return Err(ExpError::Config("the configured datasets contain no usable samples".into()));
    }
    let assigned = split(&merged, cfg.split.ratios(), cfg.split.seed)?;
    save_manifest(&assigned, &cfg.manifest_path(Stage::Original))?;
    Ok(StepSummary::of(&assigned, skipped))
}

/// Same detection for every image. Only meaningful for generated data whose
/// faces share one geometry.
#[derive(Debug, Clone)]
pub struct FixedDetector(pub FaceDetection);

impl FaceDetector for FixedDetector {
    fn detect(&self, _: &DetectRequest<'_>) -> Result<Option<FaceDetection>, DetectError> {
        Ok(Some(self.0))
    }

    fn reentrant(&self) -> bool {
        true
    }
}

fn build_detector(cfg: &ExperimentConfig) -> Result<Option<Box<dyn FaceDetector>>> {
    Ok(match &cfg.preprocess.detector {
        DetectorConfig::CacheOnly => None,
        DetectorConfig::Fixture { path } => Some(Box::new(FixtureDetector::load(&cfg.data_path(path))?)),
        DetectorConfig::External { command } => Some(Box::new(ExternalDetector::new(command.clone()))),
        DetectorConfig::Fixed {
            bbox,
            landmarks,
            confidence,
        } => {
            let det = FaceDetection {
                bbox: BoundingBox {
                    x: bbox[0],
                    y: bbox[1],
                    w: bbox[2],
                    h: bbox[3],
                },
                landmarks: landmarks.map(|l| {
                    LandmarkSet::from_points(std::array::from_fn(|i| Point::new(l[2 * i], l[2 * i + 1])))
                }),
                confidence: *confidence,
            };
            det.validate().map_err(|e| ExpError::Config(format!("fixed detector: {e}")))?;
            Some(Box::new(FixedDetector(det)))
        }
    })
}

fn load_cache(path: &Path) -> Result<DetectionCache> {
    if path.exists() {
        Ok(DetectionCache::load(path)?)
    } else {
        Ok(DetectionCache::new())
    }
}

/// Detects faces (cache first), then writes the `aligned` and `cropped`
/// stage manifests. The cache is saved even when detection fails part way,
/// so a rerun resumes where it stopped.
pub fn preprocess(cfg: &ExperimentConfig) -> Result<(StepSummary, StepSummary)> {
    let originals = load_stage(cfg, Stage::Original)?;
    let cache_path = cfg.detection_cache_path();
    let mut cache = load_cache(&cache_path)?;
    let detector = build_detector(cfg)?;
    let derived = derive_variants(&originals, detector.as_deref(), &mut cache, cfg.preprocess.mask());
    cache.save(&cache_path)?;
    let variants = derived?;
    save_manifest(&variants.aligned, &cfg.manifest_path(Stage::Aligned))?;
    save_manifest(&variants.cropped, &cfg.manifest_path(Stage::Cropped))?;
    let reasons = |stage: Stage| -> Vec<String> {
        variants
            .discards
            .iter()
            .filter(|d| Some(d.variant) == stage.variant())
            .map(|d| format!("{}: {}", d.group_id, d.reason))
            .collect()
    };
    Ok((
        StepSummary::of(&variants.aligned, reasons(Stage::Aligned)),
        StepSummary::of(&variants.cropped, reasons(Stage::Cropped)),
    ))
}

/// Writes the `augmented_merged` stage from the originals and the detection
/// cache filled by [`preprocess`].
pub fn build_merged(cfg: &ExperimentConfig) -> Result<StepSummary> {
    let originals = load_stage(cfg, Stage::Original)?;
    let cache_path = cfg.detection_cache_path();
    if !cache_path.exists() {
        return Err(ExpError::MissingManifest {
            path: cache_path,
            step: "preprocess",
        });
    }
    let cache = DetectionCache::load(&cache_path)?;
    let (merged, discards) = build_augmented_merged(&originals, &cache, cfg.preprocess.mask())?;
    save_manifest(&merged, &cfg.manifest_path(Stage::AugmentedMerged))?;
    let skipped = discards
        .iter()
        .map(|d| format!("{} ({}): {}", d.group_id, d.variant.as_str(), d.reason))
        .collect();
    Ok(StepSummary::of(&merged, skipped))
}

/// Loads and validates a stage manifest. Failures are configuration errors.
pub fn load_stage(cfg: &ExperimentConfig, stage: Stage) -> Result<DatasetManifest> {
    let path = cfg.manifest_path(stage);
    if !path.exists() {
        return Err(ExpError::MissingManifest {
            path,
            step: stage.producer(),
        });
    }
    let manifest = load_manifest(&path)
        .and_then(|m| m.validate().map(|_| m))
        .map_err(|e| ExpError::InvalidManifest {
            path: path.clone(),
            reason: e.to_string(),
        })?;
    Ok(manifest)
}

/// Samples of `manifest` that belong to `source`.
pub fn source_subset(manifest: &DatasetManifest, source: Source) -> DatasetManifest {
    if source == Source::Merged {
        manifest.clone()
    } else {
        manifest.filter(|s| source.contains(s.source))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SyntheticSource;

    fn synthetic_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            work_dir: dir.to_path_buf(),
            ..Default::default()
        };
        for (source, phase) in [(Source::Ferplus, 0.0), (Source::Kdef, 1.0)] {
            cfg.datasets.synthetic.push(SyntheticSource {
                source,
                n_per_class: 4,
                seed: 1,
                contrast: 70.0,
                mean_level: 128.0,
                noise_sigma: 20.0,
                phase,
            });
        }
        cfg.preprocess.detector = DetectorConfig::Fixed {
            bbox: [0.0, 0.0, 48.0, 48.0],
            landmarks: Some([16.0, 18.0, 32.0, 18.0, 24.0, 26.0, 18.0, 34.0, 30.0, 34.0]),
            confidence: 1.0,
        };
        cfg
    }

    #[test]
    fn steps_write_every_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synthetic_config(dir.path());
        let s = ingest(&cfg).unwrap();
        assert_eq!(s.samples, 56);
        assert_eq!(s.per_source[&DatasetId::Ferplus], 28);
        assert_eq!(s.per_source[&DatasetId::Kdef], 28);
        let (aligned, cropped) = preprocess(&cfg).unwrap();
        assert_eq!((aligned.samples, cropped.samples), (56, 56));
        let merged = build_merged(&cfg).unwrap();
        assert_eq!(merged.samples, 168);
        for stage in Stage::ALL {
            let m = load_stage(&cfg, stage).unwrap();
            assert_eq!(m.split_sizes().get(&Split::Unassigned), None);
        }
        let kdef = source_subset(&load_stage(&cfg, Stage::Aligned).unwrap(), Source::Kdef);
        assert_eq!(kdef.len(), 28);
    }

    #[test]
    fn ingest_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        ingest(&synthetic_config(a.path())).unwrap();
        ingest(&synthetic_config(b.path())).unwrap();
        let read = |d: &Path| std::fs::read(d.join("manifests/original.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn missing_stage_and_cache_only_misses_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synthetic_config(dir.path());
        let err = load_stage(&cfg, Stage::Aligned).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("fer preprocess"));
        ingest(&cfg).unwrap();
        assert!(build_merged(&cfg).unwrap_err().is_config());
        cfg.preprocess.detector = DetectorConfig::CacheOnly;
        assert!(preprocess(&cfg).is_err());
        assert!(build_merged(&cfg).is_err());
    }

    #[test]
    fn no_datasets_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            work_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        assert!(ingest(&cfg).unwrap_err().is_config());
    }
}
