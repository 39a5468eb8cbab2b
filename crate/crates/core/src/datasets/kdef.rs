use std::collections::BTreeSet;
use std::path::Path;

use walkdir::WalkDir;

use super::ckplus::is_image_file;
use super::{LoadOutcome, RawImage, RawRecord};
use crate::error::{Error, Result};
use crate::label::{DatasetId, EmotionLabel, RawLabel};

/// Pose filter yielding the 2,938-image subset: straight plus both half
/// profiles.
pub const DEFAULT_KDEF_POSES: [&str; 3] = ["S", "HL", "HR"];

/// Fields encoded in a KDEF file name such as `AF01ANS.JPG` or `BM22HAHL.JPG`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KdefName {
    pub session: char,
    pub gender: char,
    pub subject: u8,
    pub emotion: EmotionLabel,
    pub pose: String,
}

/// Decodes `<session A|B><gender F|M><2-digit id><emotion><pose>`.
pub fn decode_kdef_name(stem: &str) -> Option<KdefName> {
    let s = stem.to_ascii_uppercase();
    let b = s.as_bytes();
    if b.len() < 7 || !s.is_ascii() {
        return None;
    }
    let session = b[0] as char;
    let gender = b[1] as char;
    if !matches!(session, 'A' | 'B') || !matches!(gender, 'F' | 'M') {
        return None;
    }
    let subject: u8 = s[2..4].parse().ok()?;
    let emotion = match &s[4..6] {
        "AF" => EmotionLabel::Fear,
        "AN" => EmotionLabel::Angry,
        "DI" => EmotionLabel::Disgust,
        "HA" => EmotionLabel::Happy,
        "NE" => EmotionLabel::Neutral,
        "SA" => EmotionLabel::Sad,
        "SU" => EmotionLabel::Surprise,
        _ => return None,
    };
    let pose = &s[6..];
    if !matches!(pose, "S" | "HL" | "HR" | "FL" | "FR") {
        return None;
    }
    Some(KdefName {
        session,
        gender,
        subject,
        emotion,
        pose: pose.to_string(),
    })
}

/// Reads KDEF images recursively under `root`, keeping those whose pose code
/// is in `pose_filter`. Files are visited in sorted path order.
pub fn load_kdef(root: &Path, pose_filter: &BTreeSet<String>) -> Result<LoadOutcome> {
    let mut out = LoadOutcome::default();
    if pose_filter.is_empty() {
        return Ok(out);
    }
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || !is_image_file(path) {
            continue;
        }
        let key = path
            .strip_prefix(root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let Some(name) = decode_kdef_name(stem) else {
            out.issue(key, "file name does not follow the KDEF scheme");
            continue;
        };
        if !pose_filter.contains(&name.pose) {
            continue;
        }
        match image::open(path) {
            Ok(img) => out.records.push(RawRecord {
                image: RawImage::from_dynamic(&img)?,
                label: RawLabel::Emotion(name.emotion),
                source: DatasetId::Kdef,
                source_key: key,
            }),
            Err(e) => out.issue(key, e.to_string()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_standard_names() {
        let n = decode_kdef_name("AF01ANS").unwrap();
        assert_eq!(
            (n.session, n.gender, n.subject, n.emotion, n.pose.as_str()),
            ('A', 'F', 1, EmotionLabel::Angry, "S")
        );
        let n = decode_kdef_name("bm22hahl").unwrap();
        assert_eq!((n.emotion, n.pose.as_str()), (EmotionLabel::Happy, "HL"));
        assert!(decode_kdef_name("AF01XXS").is_none());
        assert!(decode_kdef_name("AF01ANQ").is_none());
        assert!(decode_kdef_name("readme").is_none());
    }

    #[test]
    fn empty_pose_filter_yields_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = load_kdef(dir.path(), &BTreeSet::new()).unwrap();
        assert!(out.records.is_empty());
    }
}
