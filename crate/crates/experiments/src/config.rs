//! Experiment configuration file (TOML). Relative paths resolve against the
//! directory holding the config file; `FER_DATA_ROOT` overrides `data_root`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fer_core::datasets::{SplitRatios, Variant, DEFAULT_KDEF_POSES};
use fer_core::preprocess::MaskSize;
use fer_core::DatasetId;
use fer_nn::Arch;
use fer_train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};

pub const DATA_ROOT_ENV: &str = "FER_DATA_ROOT";

/// Dataset stage a run trains and tests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Original,
    Aligned,
    Cropped,
    AugmentedMerged,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Original, Stage::Aligned, Stage::Cropped, Stage::AugmentedMerged];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Original => "original",
            Stage::Aligned => "aligned",
            Stage::Cropped => "cropped",
            Stage::AugmentedMerged => "augmented_merged",
        }
    }

    /// CLI step that writes this stage's manifest.
    pub fn producer(self) -> &'static str {
        match self {
            Stage::Original => "ingest",
            Stage::Aligned | Stage::Cropped => "preprocess",
            Stage::AugmentedMerged => "build-merged",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Stage::Original => Some(Variant::Original),
            Stage::Aligned => Some(Variant::Aligned),
            Stage::Cropped => Some(Variant::Cropped),
            Stage::AugmentedMerged => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// A single source dataset or the merged corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    Ferplus,
    Ckplus,
    Kdef,
    Merged,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Ferplus, Source::Ckplus, Source::Kdef, Source::Merged];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Ferplus => "FERPLUS",
            Source::Ckplus => "CKPLUS",
            Source::Kdef => "KDEF",
            Source::Merged => "MERGED",
        }
    }

    pub fn dataset(self) -> Option<DatasetId> {
        match self {
            Source::Ferplus => Some(DatasetId::Ferplus),
            Source::Ckplus => Some(DatasetId::Ckplus),
            Source::Kdef => Some(DatasetId::Kdef),
            Source::Merged => None,
        }
    }

    pub fn contains(self, id: DatasetId) -> bool {
        self.dataset().is_none_or(|d| d == id)
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown source {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data_root: PathBuf,
    /// Manifests, detection cache, run directories and rendered results.
    pub work_dir: PathBuf,
    pub datasets: DatasetsConfig,
    pub split: SplitConfig,
    pub preprocess: PreprocessConfig,
    pub training: TrainingConfig,
    pub ablation: Option<AblationConfig>,
    pub cross: Option<CrossConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data_root: PathBuf::from("data"),
            work_dir: PathBuf::from("work"),
            datasets: DatasetsConfig::default(),
            split: SplitConfig::default(),
            preprocess: PreprocessConfig::default(),
            training: TrainingConfig::default(),
            ablation: None,
            cross: None,
        }
    }
}

/// Paths below are relative to `data_root`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetsConfig {
    pub ferplus_csv: Option<PathBuf>,
    pub ckplus_dir: Option<PathBuf>,
    pub kdef_dir: Option<PathBuf>,
    pub kdef_poses: Vec<String>,
    /// Generated stand-ins tagged as one of the real sources.
    pub synthetic: Vec<SyntheticSource>,
}

impl Default for DatasetsConfig {
    fn default() -> Self {
        Self {
            ferplus_csv: None,
            ckplus_dir: None,
            kdef_dir: None,
            kdef_poses: DEFAULT_KDEF_POSES.iter().map(|s| s.to_string()).collect(),
            synthetic: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub source: Source,
    pub n_per_class: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_mean_level")]
    pub mean_level: f64,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub phase: f64,
}

fn default_contrast() -> f64 {
    70.0
}

fn default_mean_level() -> f64 {
    128.0
}

fn default_noise() -> f64 {
    20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub seed: u64,
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        Self {
            seed: 0,
            train: r.train,
            val: r.val,
            test: r.test,
        }
    }
}

impl SplitConfig {
    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.train,
            val: self.val,
            test: self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub mask_width: usize,
    pub mask_height: usize,
    pub detector: DetectorConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let m = MaskSize::default();
        Self {
            mask_width: m.width,
            mask_height: m.height,
            detector: DetectorConfig::CacheOnly,
        }
    }
}

impl PreprocessConfig {
    pub fn mask(&self) -> MaskSize {
        MaskSize {
            width: self.mask_width,
            height: self.mask_height,
        }
    }
}

/// Where detections come from when the cache has no entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    /// Only the detection cache; a miss is an error.
    CacheOnly,
    /// Golden sidecar file, relative to `data_root`.
    Fixture { path: PathBuf },
    /// Shell command, see `ExternalDetector`.
    External { command: String },
    /// The same detection for every image; for generated data only.
    Fixed {
        bbox: [f64; 4],
        landmarks: Option<[f64; 10]>,
        #[serde(default = "default_confidence")]
        confidence: f64,
    },
}

fn default_confidence() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    pub eval_batch_size: usize,
    pub augment: AugmentConfig,
    pub sampler: SamplerConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            patience: t.patience,
            seed: t.seed,
            eval_batch_size: t.eval_batch_size,
            augment: AugmentConfig {
                enabled: t.augment,
                n_ops: t.augment_ops,
                magnitude: t.augment_magnitude,
            },
            sampler: SamplerConfig {
                enabled: t.weighted_sampler,
                seed: t.sampler_seed,
            },
        }
    }
}

impl TrainingConfig {
    /// Trainer settings with the augment and sampler switches overridden.
    pub fn train_config(&self, augment: bool, sampler: bool) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            patience: self.patience,
            seed: self.seed,
            augment,
            augment_ops: self.augment.n_ops,
            augment_magnitude: self.augment.magnitude,
            weighted_sampler: sampler,
            sampler_seed: self.sampler.seed,
            eval_batch_size: self.eval_batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub n_ops: usize,
    pub magnitude: u8,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        TrainingConfig::default().augment
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub enabled: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    pub augment: bool,
    pub sampler: bool,
}

/// One run per architecture × stage × flag combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub architectures: Vec<Arch>,
    pub stages: Vec<Stage>,
    pub flags: Vec<Flags>,
    pub train_source: Source,
    pub test_source: Source,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            architectures: Arch::ALL.to_vec(),
            stages: vec![Stage::Original, Stage::Aligned, Stage::Cropped],
            flags: vec![Flags {
                augment: false,
                sampler: false,
            }],
            train_source: Source::Merged,
            test_source: Source::Merged,
        }
    }
}

/// One model per source, each tested on every source's test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossConfig {
    pub architecture: Arch,
    pub stage: Stage,
    pub sources: Vec<Source>,
    pub augment: bool,
    pub sampler: bool,
}

impl Default for CrossConfig {
    fn default() -> Self {
        Self {
            architecture: Arch::Densenet121,
            stage: Stage::Aligned,
            sources: Source::ALL.to_vec(),
            augment: true,
            sampler: false,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file, resolves relative paths against its directory and
    /// applies the `FER_DATA_ROOT` override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExpError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            ExpError::Config(msg) => ExpError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data_root = match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) => PathBuf::from(root),
            None => base.join(&cfg.data_root),
        };
        cfg.work_dir = base.join(&cfg.work_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ExpError::Config(msg));
        self.split.ratios().validate().map_err(|e| ExpError::Config(e.to_string()))?;
        self.training
            .train_config(self.training.augment.enabled, self.training.sampler.enabled)
            .validate()
            .map_err(|e| ExpError::Config(e.to_string()))?;
        if self.preprocess.mask_width == 0 || self.preprocess.mask_height == 0 {
            return bad("mask size must be positive".into());
        }
        for s in &self.datasets.synthetic {
            if s.source == Source::Merged {
                return bad("a synthetic source must be tagged FERPLUS, CKPLUS or KDEF".into());
            }
            if s.n_per_class == 0 {
                return bad("synthetic n_per_class must be at least 1".into());
            }
        }
        if let Some(a) = &self.ablation {
            if a.architectures.is_empty() || a.stages.is_empty() || a.flags.is_empty() {
                return bad("ablation needs at least one architecture, stage and flag set".into());
            }
        }
        if let Some(c) = &self.cross {
            if c.sources.is_empty() {
                return bad("cross needs at least one source".into());
            }
            let mut seen = c.sources.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != c.sources.len() {
                return bad("cross sources must be distinct".into());
            }
        }
        Ok(())
    }

    pub fn manifest_dir(&self) -> PathBuf {
        self.work_dir.join("manifests")
    }

    pub fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.manifest_dir().join(format!("{}.csv", stage.as_str()))
    }

    pub fn detection_cache_path(&self) -> PathBuf {
        self.manifest_dir().join("detections.csv")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.work_dir.join("runs")
    }

    pub fn data_path(&self, rel: &Path) -> PathBuf {
        self.data_root.join(rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.training.train_config(false, false), TrainConfig::default());
    }

    #[test]
    fn full_schema_parses() {
        let text = r#"
            data_root = "/data"
            work_dir = "out"
            [datasets]
            ferplus_csv = "fer/ferplus.csv"
            kdef_poses = ["S"]
            [[datasets.synthetic]]
            source = "KDEF"
            n_per_class = 5
            phase = 1.5
            [split]
            seed = 3
            [preprocess.detector]
            kind = "fixed"
            bbox = [0.0, 0.0, 48.0, 48.0]
            [training]
            epochs = 4
            [training.augment]
            enabled = true
            magnitude = 5
            [training.sampler]
            enabled = true
            seed = 9
            [ablation]
            architectures = ["resnet18"]
            stages = ["aligned", "augmented_merged"]
            flags = [{ augment = true, sampler = false }]
            [cross]
            sources = ["FERPLUS", "KDEF"]
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.datasets.synthetic[0].source, Source::Kdef);
        assert_eq!(cfg.datasets.synthetic[0].contrast, 70.0);
        assert!(matches!(cfg.preprocess.detector, DetectorConfig::Fixed { landmarks: None, .. }));
        let t = cfg.training.train_config(true, true);
        assert_eq!((t.epochs, t.augment_magnitude, t.sampler_seed), (4, 5, Some(9)));
        let a = cfg.ablation.unwrap();
        assert_eq!(a.stages, vec![Stage::Aligned, Stage::AugmentedMerged]);
        assert_eq!(a.train_source, Source::Merged);
        assert_eq!(cfg.cross.unwrap().architecture, Arch::Densenet121);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ExperimentConfig::parse("colour = 1").is_err());
        assert!(ExperimentConfig::parse("[ablation]\nstages = [\"blurred\"]").is_err());
        assert!(ExperimentConfig::parse("[split]\ntrain = 0.9").is_err());
        assert!(ExperimentConfig::parse("[cross]\nsources = [\"KDEF\", \"KDEF\"]").is_err());
        assert!(ExperimentConfig::parse("[training]\nbatch_size = 0").is_err());
        let err = ExperimentConfig::parse("[[datasets.synthetic]]\nsource = \"MERGED\"\nn_per_class = 1").unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        for s in Source::ALL {
            assert_eq!(s.as_str().parse::<Source>().unwrap(), s);
        }
        assert!(Source::Merged.contains(DatasetId::Synthetic));
        assert!(!Source::Kdef.contains(DatasetId::Ckplus));
    }
}
