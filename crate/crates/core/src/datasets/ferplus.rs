use std::path::Path;

use super::{LoadOutcome, RawImage, RawRecord};
use crate::error::{Error, Result};
use crate::label::{DatasetId, EmotionLabel, RawLabel};

const PIXELS: usize = 48 * 48;

/// How annotator votes are reduced to one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VotePolicy {
    /// Most votes wins; ties go to the lowest canonical index, and the
    /// non-emotion columns rank after all seven emotions.
    #[default]
    Majority,
}

/// Vote column kinds in tie-break order after the canonical emotions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum VoteKind {
    Emotion(EmotionLabel),
    Contempt,
    Unknown,
    NotAFace,
}

fn vote_kind(column: &str) -> Option<VoteKind> {
    let lower = column.trim().to_ascii_lowercase();
    if matches!(lower.as_str(), "nf" | "not-a-face" | "notface" | "not_a_face") {
        return Some(VoteKind::NotAFace);
    }
    match RawLabel::parse(&lower)? {
        RawLabel::Emotion(l) => Some(VoteKind::Emotion(l)),
        RawLabel::Contempt => Some(VoteKind::Contempt),
        RawLabel::Unknown => Some(VoteKind::Unknown),
    }
}

struct Layout {
    pixels: usize,
    key: Option<usize>,
    votes: Vec<(usize, VoteKind)>,
}

fn layout(headers: &csv::StringRecord) -> Result<Layout> {
    let mut pixels = None;
    let mut key = None;
    let mut votes = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let lower = h.trim().to_ascii_lowercase();
        if lower == "pixels" {
            pixels = Some(i);
        } else if matches!(lower.as_str(), "image name" | "image_name" | "key") {
            key = Some(i);
        } else if let Some(kind) = vote_kind(&lower) {
            votes.push((i, kind));
        }
    }
    let pixels = pixels.ok_or_else(|| Error::MalformedRow {
        row: 0,
        reason: "missing `pixels` column".into(),
    })?;
    if votes.is_empty() {
        return Err(Error::MalformedRow {
            row: 0,
            reason: "no vote-count columns".into(),
        });
    }
    votes.sort_by_key(|&(_, kind)| kind);
    Ok(Layout { pixels, key, votes })
}

fn parse_pixels(field: &str) -> std::result::Result<Vec<u8>, String> {
    let values: Vec<u8> = field
        .split_whitespace()
        .map(|t| t.parse::<u8>().map_err(|_| format!("bad pixel token {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != PIXELS {
        return Err(format!("{} pixel values, expected {PIXELS}", values.len()));
    }
    Ok(values)
}

/// Reads FER+ from a single CSV holding a `pixels` column (2304
/// space-separated intensities) and the per-class vote counts (`neutral`,
/// `happiness`, …, `contempt`, `unknown`, `NF`).
///
/// Rows whose winning vote is contempt, unknown or not-a-face are dropped
/// silently; malformed rows are reported in the outcome with their 1-based
/// data row number.
pub fn load_ferplus(csv_path: &Path, policy: VotePolicy) -> Result<LoadOutcome> {
    let VotePolicy::Majority = policy;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(csv_path)
        .map_err(|source| Error::Csv {
            path: csv_path.to_path_buf(),
            source,
        })?;
    let headers = reader.headers().map_err(|source| Error::Csv {
        path: csv_path.to_path_buf(),
        source,
    })?;
    let layout = layout(headers)?;

    let mut out = LoadOutcome::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.issue(format!("row {row_no}"), e.to_string());
                continue;
            }
        };
        let pixels = match row.get(layout.pixels).map(parse_pixels) {
            Some(Ok(p)) => p,
            Some(Err(reason)) => {
                out.issue(format!("row {row_no}"), reason);
                continue;
            }
            None => {
                out.issue(format!("row {row_no}"), "missing pixel field");
                continue;
            }
        };
        let mut best: Option<(u32, VoteKind)> = None;
        let mut bad_vote = None;
        for &(col, kind) in &layout.votes {
            let field = row.get(col).unwrap_or("").trim();
            let votes: u32 = if field.is_empty() {
                0
            } else {
                match field.parse::<f64>() {
                    Ok(v) if v >= 0.0 && v.fract() == 0.0 => v as u32,
                    _ => {
                        bad_vote = Some(format!("bad vote count {field:?}"));
                        break;
                    }
                }
            };
            // columns are visited in tie-break order, so strict > keeps the first
            if votes > 0 && best.is_none_or(|(b, _)| votes > b) {
                best = Some((votes, kind));
            }
        }
        if let Some(reason) = bad_vote {
            out.issue(format!("row {row_no}"), reason);
            continue;
        }
        let label = match best {
            Some((_, VoteKind::Emotion(l))) => l,
            _ => continue,
        };
        let source_key = layout
            .key
            .and_then(|k| row.get(k))
            .map(str::trim)
            .filter(|k| !k.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| format!("row{row_no:06}"));
        out.records.push(RawRecord {
            image: RawImage::new(48, 48, 1, pixels)?,
            label: RawLabel::Emotion(label),
            source: DatasetId::Ferplus,
            source_key,
        });
    }
    Ok(out)
}
