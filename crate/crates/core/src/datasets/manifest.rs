use std::collections::{BTreeMap, HashMap, HashSet};

use sha2::{Digest, Sha256};

use super::{ImageSample, Split, Variant};
use crate::error::{Error, Result};
use crate::label::{EmotionLabel, NUM_CLASSES};

/// Provenance carried in the manifest file header.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ManifestHeader {
    /// Seed of the split that produced the assignments, if any.
    pub seed: Option<u64>,
}

/// Ordered collection of canonical samples with cached per-class counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    samples: Vec<ImageSample>,
    counts: [usize; NUM_CLASSES],
    pub header: ManifestHeader,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            samples: Vec::new(),
            counts: [0; NUM_CLASSES],
            header: ManifestHeader::default(),
        }
    }
}

impl DatasetManifest {
    /// Builds a manifest, rejecting non-canonical pixels and duplicate
    /// `(source, source_key, variant)` triples.
    pub fn from_samples(samples: Vec<ImageSample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        let mut counts = [0; NUM_CLASSES];
        for s in &samples {
            if !s.pixels.is_canonical() {
                return Err(Error::Manifest(format!(
                    "sample {}/{} is {}x{}, expected 48x48",
                    s.source,
                    s.source_key,
                    s.pixels.width(),
                    s.pixels.height()
                )));
            }
            if !seen.insert((s.source, s.source_key.as_str(), s.variant)) {
                return Err(Error::DuplicateSample {
                    source_id: s.source.to_string(),
                    key: s.source_key.clone(),
                    variant: s.variant.as_str().to_string(),
                });
            }
            counts[s.label.index()] += 1;
        }
        let manifest = Self {
            samples,
            counts,
            header: ManifestHeader::default(),
        };
        manifest.check_group_splits()?;
        Ok(manifest)
    }

    pub fn samples(&self) -> &[ImageSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<ImageSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-class counts `n_c` in canonical order.
    pub fn counts(&self) -> [usize; NUM_CLASSES] {
        self.counts
    }

    pub fn count(&self, label: EmotionLabel) -> usize {
        self.counts[label.index()]
    }

    /// Recomputes counts from the records and checks every invariant.
    pub fn validate(&self) -> Result<()> {
        let mut counts = [0; NUM_CLASSES];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        if counts != self.counts {
            return Err(Error::Manifest(format!(
                "stored counts {:?} differ from records {:?}",
                self.counts, counts
            )));
        }
        if counts.iter().sum::<usize>() != self.len() {
            return Err(Error::Manifest("class counts do not sum to N".into()));
        }
        Self::from_samples(self.samples.clone()).map(|_| ())
    }

    fn check_group_splits(&self) -> Result<()> {
        let mut splits: HashMap<String, Split> = HashMap::new();
        for s in &self.samples {
            let gid = s.group_id();
            match splits.get(&gid) {
                Some(&existing) if existing != s.split => {
                    return Err(Error::Manifest(format!(
                        "group {gid} spans splits {} and {}",
                        existing.as_str(),
                        s.split.as_str()
                    )));
                }
                Some(_) => {}
                None => {
                    splits.insert(gid, s.split);
                }
            }
        }
        Ok(())
    }

    /// Distinct group ids in order of first appearance.
    pub fn groups(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for s in &self.samples {
            let gid = s.group_id();
            if seen.insert(gid.clone()) {
                out.push(gid);
            }
        }
        out
    }

    /// Indices of the samples assigned to `split`, in manifest order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sub-manifest of one split, keeping the header.
    pub fn subset(&self, split: Split) -> DatasetManifest {
        self.filter(|s| s.split == split)
    }

    pub fn filter(&self, mut keep: impl FnMut(&ImageSample) -> bool) -> DatasetManifest {
        let samples: Vec<_> = self.samples.iter().filter(|s| keep(s)).cloned().collect();
        let mut counts = [0; NUM_CLASSES];
        for s in &samples {
            counts[s.label.index()] += 1;
        }
        DatasetManifest {
            samples,
            counts,
            header: self.header.clone(),
        }
    }

    pub fn with_variant(&self, variant: Variant) -> DatasetManifest {
        self.filter(|s| s.variant == variant)
    }

    /// Per-split sample counts.
    pub fn split_sizes(&self) -> BTreeMap<Split, usize> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.split).or_insert(0) += 1;
        }
        out
    }

    /// Content fingerprint over record metadata and pixel digests. Identical
    /// manifests (including split assignments) have identical fingerprints.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.samples {
            hasher.update(super::store::record_line(s, &super::store::pixel_digest(&s.pixels)));
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }

    pub(crate) fn set_splits(&mut self, splits: impl IntoIterator<Item = Split>) {
        for (s, split) in self.samples.iter_mut().zip(splits) {
            s.split = split;
        }
    }
}

/// Concatenates manifests, preserving provenance and order.
pub fn merge(manifests: &[DatasetManifest]) -> Result<DatasetManifest> {
    let samples: Vec<ImageSample> = manifests
        .iter()
        .flat_map(|m| m.samples.iter().cloned())
        .collect();
    let mut merged = DatasetManifest::from_samples(samples)?;
    if let [only] = manifests {
        merged.header = only.header.clone();
    }
    Ok(merged)
}
