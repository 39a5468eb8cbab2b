use super::{align, detect, landmark_mask, DetectRequest, DetectionCache, FaceDetector, MaskSize};
use crate::datasets::{DatasetManifest, ImageSample, Variant};
use crate::error::Result;

/// A sample left out of a derived variant, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discard {
    pub group_id: String,
    pub variant: Variant,
    pub reason: String,
}

/// Aligned and cropped variants derived from the originals of a manifest.
#[derive(Debug, Clone, Default)]
pub struct VariantSet {
    pub aligned: DatasetManifest,
    pub cropped: DatasetManifest,
    pub discards: Vec<Discard>,
}

/// Runs detection (cache first), alignment and landmark masking over every
/// original sample. Variants inherit the original's split.
pub fn derive_variants(
    manifest: &DatasetManifest,
    detector: Option<&dyn FaceDetector>,
    cache: &mut DetectionCache,
    mask: MaskSize,
) -> Result<VariantSet> {
    let mut aligned = Vec::new();
    let mut cropped = Vec::new();
    let mut discards = Vec::new();
    let mut discard = |s: &ImageSample, variant: Variant, reason: String| {
        log::debug!("discarding {} ({}): {reason}", s.group_id(), variant.as_str());
        discards.push(Discard {
            group_id: s.group_id(),
            variant,
            reason,
        });
    };
    for s in manifest.samples().iter().filter(|s| s.variant == Variant::Original) {
        let request = DetectRequest {
            source: s.source,
            source_key: &s.source_key,
            image: &s.pixels,
        };
        let Some(det) = detect(detector, cache, &request)? else {
            discard(s, Variant::Aligned, "no face detected".into());
            discard(s, Variant::Cropped, "no face detected".into());
            continue;
        };
        let a = match align(s, &det) {
            Ok(a) => a,
            Err(reason) => {
                discard(s, Variant::Aligned, reason.clone());
                discard(s, Variant::Cropped, reason);
                continue;
            }
        };
        match landmark_mask(&a.sample, a.landmarks.as_ref(), mask) {
            Ok(c) => cropped.push(c),
            Err(reason) => discard(s, Variant::Cropped, reason),
        }
        aligned.push(a.sample);
    }
    let mut aligned = DatasetManifest::from_samples(aligned)?;
    let mut cropped = DatasetManifest::from_samples(cropped)?;
    aligned.header = manifest.header.clone();
    cropped.header = manifest.header.clone();
    Ok(VariantSet {
        aligned,
        cropped,
        discards,
    })
}

/// Original + aligned + cropped variants, grouped per original image so all
/// variants of a group are adjacent and share a split.
pub fn build_augmented_merged(
    manifest: &DatasetManifest,
    cache: &DetectionCache,
    mask: MaskSize,
) -> Result<(DatasetManifest, Vec<Discard>)> {
    let mut cache = cache.clone();
    let originals = manifest.with_variant(Variant::Original);
    let variants = derive_variants(&originals, None, &mut cache, mask)?;
    let mut aligned = variants.aligned.samples().iter().peekable();
    let mut cropped = variants.cropped.samples().iter().peekable();
    let mut samples = Vec::with_capacity(originals.len() * 3);
    for o in originals.samples() {
        let same = |s: &&ImageSample| s.source == o.source && s.source_key == o.source_key;
        samples.push(o.clone());
        if let Some(a) = aligned.next_if(same) {
            samples.push(a.clone());
        }
        if let Some(c) = cropped.next_if(same) {
            samples.push(c.clone());
        }
    }
    let mut out = DatasetManifest::from_samples(samples)?;
    out.header = manifest.header.clone();
    Ok((out, variants.discards))
}
