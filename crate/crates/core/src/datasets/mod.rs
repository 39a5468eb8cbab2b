//! Source loaders, harmonization to canonical 48×48 samples, merging and
//! group-aware splitting.

mod ckplus;
mod ferplus;
mod kdef;
mod manifest;
mod split;
mod store;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ckplus::load_ckplus;
pub use ferplus::{load_ferplus, VotePolicy};
pub use kdef::{decode_kdef_name, load_kdef, KdefName, DEFAULT_KDEF_POSES};
pub use manifest::{merge, DatasetManifest, ManifestHeader};
pub use split::{split, SplitRatios};
pub use store::{load_manifest, pixel_digest, save_manifest, TOOLKIT_VERSION};
pub use synth::{synth_generate, synth_generate_with, SynthOptions};

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, SIDE};
use crate::label::{DatasetId, EmotionLabel, RawLabel};

/// Decoded source image, before harmonization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    channels: u8,
    data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: u8, data: Vec<u8>) -> Result<Self> {
        if !(channels == 1 || channels == 3) {
            return Err(Error::InvalidImage(format!("{channels} channels")));
        }
        if width == 0 || height == 0 || data.is_empty() {
            return Err(Error::InvalidImage("empty image payload".into()));
        }
        if data.len() != width * height * channels as usize {
            return Err(Error::InvalidImage(format!(
                "{} bytes for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(frame: GrayFrame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            channels: 1,
            data: frame.into_data(),
        }
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            Self::new(w, h, 3, img.to_rgb8().into_raw())
        } else {
            Self::new(w, h, 1, img.to_luma8().into_raw())
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn to_gray(&self) -> GrayFrame {
        match self.channels {
            1 => GrayFrame::new(self.width, self.height, self.data.clone())
                .expect("validated at construction"),
            _ => GrayFrame::from_rgb(self.width, self.height, &self.data)
                .expect("validated at construction"),
        }
    }
}

/// One image as produced by a source loader.
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub image: RawImage,
    pub label: RawLabel,
    pub source: DatasetId,
    /// Stable identifier of the original image within its dataset.
    pub source_key: String,
}

/// Problem encountered while loading that did not abort the load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadIssue {
    pub location: String,
    pub reason: String,
}

impl fmt::Display for LoadIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.reason)
    }
}

#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub records: Vec<RawRecord>,
    pub issues: Vec<LoadIssue>,
}

impl LoadOutcome {
    pub(crate) fn issue(&mut self, location: impl Into<String>, reason: impl Into<String>) {
        let issue = LoadIssue {
            location: location.into(),
            reason: reason.into(),
        };
        log::warn!("skipping {issue}");
        self.issues.push(issue);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Aligned,
    Cropped,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Aligned => "aligned",
            Variant::Cropped => "cropped",
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "original" => Ok(Variant::Original),
            "aligned" => Ok(Variant::Aligned),
            "cropped" => Ok(Variant::Cropped),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// A canonical 48×48 grayscale sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSample {
    pub pixels: GrayFrame,
    pub label: EmotionLabel,
    pub source: DatasetId,
    pub source_key: String,
    pub variant: Variant,
    pub split: Split,
}

impl ImageSample {
    /// Identifier shared by all variants derived from one original image.
    pub fn group_id(&self) -> String {
        group_id(self.source, &self.source_key)
    }
}

pub fn group_id(source: DatasetId, source_key: &str) -> String {
    format!("{source}/{source_key}")
}

/// Converts a raw record to a canonical sample: luma conversion for color
/// input, then bilinear resize to 48×48.
pub fn standardize(record: &RawRecord) -> Result<ImageSample> {
    let label = record
        .label
        .canonical()
        .ok_or_else(|| Error::NonCanonicalLabel(record.label.to_string()))?;
    let pixels = record.image.to_gray().resize_bilinear(SIDE, SIDE);
    Ok(ImageSample {
        pixels,
        label,
        source: record.source,
        source_key: record.source_key.clone(),
        variant: Variant::Original,
        split: Split::Unassigned,
    })
}

/// Standardizes every record, keeping the loader order.
pub fn standardize_all(records: &[RawRecord]) -> Result<Vec<ImageSample>> {
    records.iter().map(standardize).collect()
}
