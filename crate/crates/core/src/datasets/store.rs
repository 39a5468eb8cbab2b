//! Manifest files and the content-addressed pixel store.
//!
//! ```text
//! #fer-manifest version=0.1.0 luma=0.299/0.587/0.114 resize=bilinear seed=42
//! source,source_key,variant,label_index,split,relative_pixel_path
//! KDEF,AF01/AF01AFS.JPG,original,2,train,pixels/3f/3fa1….png
//! ```
//!
//! Pixel files live under `pixels/<first two hex digits>/<sha256>.png` next
//! to the manifest, addressed by the SHA-256 of the raw 48×48 bytes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{DatasetManifest, ImageSample, ManifestHeader};
use crate::error::{Error, Result};
use crate::frame::{GrayFrame, LUMA};
use crate::label::EmotionLabel;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

const MAGIC: &str = "#fer-manifest";
const COLUMNS: &str = "source,source_key,variant,label_index,split,relative_pixel_path";

pub fn pixel_digest(frame: &GrayFrame) -> String {
    hex::encode(Sha256::digest(frame.data()))
}

fn pixel_rel_path(digest: &str) -> String {
    format!("pixels/{}/{}.png", &digest[..2], digest)
}

fn header_line(header: &ManifestHeader) -> String {
    let seed = header
        .seed
        .map(|s| s.to_string())
        .unwrap_or_else(|| "none".into());
    format!(
        "{MAGIC} version={TOOLKIT_VERSION} luma={}/{}/{} resize=bilinear seed={seed}",
        LUMA[0], LUMA[1], LUMA[2]
    )
}

/// One CSV record line (without newline) for a sample whose pixels hash to
/// `digest`.
pub(crate) fn record_line(s: &ImageSample, digest: &str) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        s.source.as_str(),
        s.source_key.as_str(),
        s.variant.as_str(),
        &s.label.index().to_string(),
        s.split.as_str(),
        &pixel_rel_path(digest),
    ])
    .expect("writing to memory");
    let mut bytes = w.into_inner().expect("flushing to memory");
    bytes.pop();
    bytes
}

/// Writes the manifest to `path` and its pixels under the sibling
/// `pixels/` directory. Existing pixel files are reused.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut out = Vec::new();
    writeln!(out, "{}", header_line(&manifest.header)).expect("memory write");
    writeln!(out, "{COLUMNS}").expect("memory write");
    for s in manifest.samples() {
        let digest = pixel_digest(&s.pixels);
        let pixel_path = dir.join(pixel_rel_path(&digest));
        if !pixel_path.exists() {
            let parent = pixel_path.parent().expect("pixel path has a parent");
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            s.pixels.save_png(&pixel_path)?;
        }
        out.extend_from_slice(&record_line(s, &digest));
        out.push(b'\n');
    }
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_header(line: &str) -> Result<ManifestHeader> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(Error::ManifestParse {
            line: 1,
            reason: format!("expected {MAGIC} header"),
        });
    }
    let mut header = ManifestHeader::default();
    for token in tokens {
        if let Some(seed) = token.strip_prefix("seed=") {
            header.seed = match seed {
                "none" => None,
                s => Some(s.parse().map_err(|_| Error::ManifestParse {
                    line: 1,
                    reason: format!("bad seed {s:?}"),
                })?),
            };
        }
    }
    Ok(header)
}

/// Reads a manifest written by [`save_manifest`], loading and verifying
/// every pixel file against its content address.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let header = parse_header(first.trim_end())?;
    let dir: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut samples = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let line = i + 3;
        let row = row.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |reason: String| Error::ManifestParse { line, reason };
        if row.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", row.len())));
        }
        let label_index: usize = row[3]
            .parse()
            .map_err(|_| bad(format!("bad label index {:?}", &row[3])))?;
        let label =
            EmotionLabel::from_index(label_index).ok_or_else(|| bad("label out of range".into()))?;
        let rel = &row[5];
        let pixels = GrayFrame::load(&dir.join(rel))?;
        let digest = pixel_digest(&pixels);
        if !rel.contains(&digest) {
            return Err(bad(format!("pixel file {rel} does not match its digest")));
        }
        samples.push(ImageSample {
            pixels,
            label,
            source: row[0].parse().map_err(bad)?,
            source_key: row[1].to_string(),
            variant: row[2].parse().map_err(bad)?,
            split: row[4].parse().map_err(bad)?,
        });
    }
    let mut manifest = DatasetManifest::from_samples(samples)?;
    manifest.header = header;
    Ok(manifest)
}
