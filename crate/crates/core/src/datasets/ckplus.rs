use std::fs;
use std::path::Path;

use super::{LoadOutcome, RawImage, RawRecord};
use crate::error::{Error, Result};
use crate::label::{DatasetId, RawLabel};

pub(crate) fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            matches!(
                e.to_ascii_lowercase().as_str(),
                "png" | "jpg" | "jpeg" | "pgm" | "bmp" | "tif" | "tiff"
            )
        })
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<fs::DirEntry>> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

/// Reads a pre-extracted CK+ tree: `root/<emotion>/<image>`.
///
/// The `contempt` directory is ignored; a missing `neutral` directory is
/// normal for CK+. Unknown directory names and undecodable images are
/// reported and skipped.
pub fn load_ckplus(root: &Path) -> Result<LoadOutcome> {
    let mut out = LoadOutcome::default();
    for entry in sorted_entries(root)? {
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let label = match RawLabel::parse(&name) {
            Some(RawLabel::Emotion(l)) => l,
            Some(_) => continue,
            None => {
                out.issue(name, "unknown emotion directory");
                continue;
            }
        };
        for file in sorted_entries(&path)? {
            let fpath = file.path();
            if !fpath.is_file() || !is_image_file(&fpath) {
                continue;
            }
            let key = format!("{}/{}", name, file.file_name().to_string_lossy());
            match image::open(&fpath) {
                Ok(img) => out.records.push(RawRecord {
                    image: RawImage::from_dynamic(&img)?,
                    label: RawLabel::Emotion(label),
                    source: DatasetId::Ckplus,
                    source_key: key,
                }),
                Err(e) => out.issue(key, e.to_string()),
            }
        }
    }
    Ok(out)
}
