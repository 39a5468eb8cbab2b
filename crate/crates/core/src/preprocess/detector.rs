use std::path::Path;
use std::process::Command;

use super::{DetectError, DetectionCache, FaceDetection};
use crate::error::Result;
use crate::frame::GrayFrame;
use crate::label::DatasetId;

pub struct DetectRequest<'a> {
    pub source: DatasetId,
    pub source_key: &'a str,
    pub image: &'a GrayFrame,
}

/// Face detector adapter: a pure function of the image returning at most one
/// (the best) detection.
pub trait FaceDetector: Send + Sync {
    fn detect(&self, request: &DetectRequest<'_>) -> Result<Option<FaceDetection>, DetectError>;

    /// Whether concurrent calls are allowed.
    fn reentrant(&self) -> bool {
        false
    }
}

/// Cache-first detection. A cache miss with no live detector is
/// [`DetectError::Unavailable`]; fresh results are stored in the cache.
pub fn detect(
    detector: Option<&dyn FaceDetector>,
    cache: &mut DetectionCache,
    request: &DetectRequest<'_>,
) -> Result<Option<FaceDetection>, DetectError> {
    if let Some(hit) = cache.get(request.source, request.source_key) {
        return Ok(*hit);
    }
    let detector = detector.ok_or_else(|| DetectError::Unavailable {
        source_id: request.source.to_string(),
        key: request.source_key.to_string(),
    })?;
    let result = detector.detect(request)?;
    if let Some(d) = &result {
        d.validate().map_err(DetectError::Adapter)?;
    }
    cache.insert(request.source, request.source_key, result);
    Ok(result)
}

/// Replays golden sidecar entries; lets the whole pipeline run without a
/// real face model.
#[derive(Debug, Clone, Default)]
pub struct FixtureDetector {
    golden: DetectionCache,
    /// Report "no face" for images whose pixels are all zero.
    pub reject_blank: bool,
}

impl FixtureDetector {
    pub fn new(golden: DetectionCache) -> Self {
        Self {
            golden,
            reject_blank: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(DetectionCache::load(path)?))
    }
}

impl FaceDetector for FixtureDetector {
    fn detect(&self, request: &DetectRequest<'_>) -> Result<Option<FaceDetection>, DetectError> {
        if self.reject_blank && request.image.data().iter().all(|&v| v == 0) {
            return Ok(None);
        }
        match self.golden.get(request.source, request.source_key) {
            Some(d) => Ok(*d),
            None => Err(DetectError::Adapter(format!(
                "no golden entry for {}/{}",
                request.source, request.source_key
            ))),
        }
    }

    fn reentrant(&self) -> bool {
        true
    }
}

/// Runs a shell command per image: `sh -c "<command> \"$1\" \"$2\" \"$3\""`
/// with the image written as PNG to `$1`, source id in `$2` and source key in
/// `$3`. The command prints one sidecar line on stdout.
#[derive(Debug, Clone)]
pub struct ExternalDetector {
    command: String,
}

impl ExternalDetector {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
        }
    }
}

impl FaceDetector for ExternalDetector {
    fn detect(&self, request: &DetectRequest<'_>) -> Result<Option<FaceDetection>, DetectError> {
        let adapter = |e: String| DetectError::Adapter(e);
        let dir = tempfile::tempdir().map_err(|e| adapter(e.to_string()))?;
        let img_path = dir.path().join("face.png");
        request
            .image
            .save_png(&img_path)
            .map_err(|e| adapter(e.to_string()))?;
        let output = Command::new("sh")
            .arg("-c")
            .arg(format!("{} \"$1\" \"$2\" \"$3\"", self.command))
            .arg("fer-detect")
            .arg(&img_path)
            .arg(request.source.as_str())
            .arg(request.source_key)
            .output()
            .map_err(|e| adapter(format!("spawning {:?}: {e}", self.command)))?;
        if !output.status.success() {
            return Err(adapter(format!(
                "{:?} exited with {}: {}",
                self.command,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let parsed = DetectionCache::from_sidecar(&stdout).map_err(|e| adapter(e.to_string()))?;
        match parsed.get(request.source, request.source_key) {
            Some(d) => Ok(*d),
            None => Err(adapter(format!(
                "detector output has no line for {}/{}",
                request.source, request.source_key
            ))),
        }
    }
}
