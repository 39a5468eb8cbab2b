//! Renders a [`ResultsTable`] as an accuracy grid with per-cell reports
//! (`results.txt`), JSON lines (`results.jsonl`), and one confusion CSV and
//! heatmap PNG per finished cell under `confusion/`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fer_core::metrics::ConfusionMatrix;
use fer_core::{EmotionLabel, NUM_CLASSES};
use image::{ImageBuffer, Rgb, RgbImage};

use crate::error::{ExpError, Result};
use crate::results::{CellRecord, ResultsTable, TableKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
    Png,
    All,
}

impl FromStr for Format {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "png" => Ok(Format::Png),
            "all" => Ok(Format::All),
            other => Err(ExpError::Config(format!(
                "unknown format {other:?} (expected text, json, csv, png or all)"
            ))),
        }
    }
}

impl Format {
    fn includes(self, other: Format) -> bool {
        self == Format::All || self == other
    }
}

/// File-name stem of a cell: row and column with anything outside
/// `[A-Za-z0-9_+.-]` replaced by `_`.
pub fn cell_slug(cell: &CellRecord) -> String {
    format!("{}__{}", cell.row, cell.column)
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_+.-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Accuracy grid in percent; failed cells show `ERR`, absent ones `-`.
pub fn grid_text(table: &ResultsTable) -> String {
    let rows = table.rows();
    let cols = table.columns();
    let corner = match table.cells.first().map(|c| c.table) {
        Some(TableKind::Cross) => "train \\ test",
        _ => "architecture",
    };
    let first = rows.iter().map(String::len).chain([corner.len()]).max().unwrap_or(0);
    let widths: Vec<usize> = cols.iter().map(|c| c.len().max(6)).collect();
    let mut out = String::from("Test accuracy (%)\n");
    write!(out, "{corner:<first$}").unwrap();
    for (c, w) in cols.iter().zip(&widths) {
        write!(out, "  {c:>w$}").unwrap();
    }
    out.push('\n');
    for r in &rows {
        write!(out, "{r:<first$}").unwrap();
        for (c, w) in cols.iter().zip(&widths) {
            let value = match table.cell(r, c) {
                None => "-".to_string(),
                Some(cell) => match cell.result() {
                    Some(res) => format!("{:.2}", res.accuracy * 100.0),
                    None => "ERR".to_string(),
                },
            };
            write!(out, "  {value:>w$}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Per-class report and confusion matrix of one cell, or its error.
pub fn cell_text(cell: &CellRecord) -> String {
    let mut out = format!("== {} | {} ==\n", cell.row, cell.column);
    writeln!(
        out,
        "{} trained on {} {}, augment {}, sampler {}, seed {}; tested on {}",
        cell.arch,
        cell.train_source,
        cell.stage,
        on_off(cell.augment),
        on_off(cell.sampler),
        cell.seed,
        cell.test_source
    )
    .unwrap();
    match cell.result() {
        None => writeln!(out, "error: {}", cell.error().unwrap_or_default()).unwrap(),
        Some(r) => {
            writeln!(out, "run {} (epoch {}, val accuracy {:.4})", r.run_id, r.best_epoch, r.val_accuracy).unwrap();
            writeln!(out, "checkpoint {}", r.checkpoint).unwrap();
            writeln!(out, "train manifest {}", r.manifest_fingerprint).unwrap();
            writeln!(out, "test set {}", r.test_fingerprint).unwrap();
            writeln!(out, "accuracy {:.2}%", r.accuracy * 100.0).unwrap();
            out.push_str(&r.report.to_text());
            out.push_str(&r.confusion.to_text());
        }
    }
    out
}

fn on_off(v: bool) -> &'static str {
    if v {
        "on"
    } else {
        "off"
    }
}

pub fn table_text(table: &ResultsTable) -> String {
    let mut out = grid_text(table);
    for cell in &table.cells {
        out.push('\n');
        out.push_str(&cell_text(cell));
    }
    out
}

/// Writes the requested formats into `out_dir` and returns the paths
/// written. Output depends only on the table, so re-rendering is
/// byte-identical.
pub fn render(table: &ResultsTable, format: Format, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if table.is_empty() {
        return Err(ExpError::Config("nothing to render: the results table is empty".into()));
    }
    let write = |path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>| -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| ExpError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| ExpError::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    let mut written = Vec::new();
    if format.includes(Format::Text) {
        write(out_dir.join("results.txt"), table_text(table).as_bytes(), &mut written)?;
    }
    if format.includes(Format::Json) {
        write(out_dir.join("results.jsonl"), table.to_jsonl().as_bytes(), &mut written)?;
    }
    for cell in &table.cells {
        let Some(r) = cell.result() else { continue };
        let stem = out_dir.join("confusion").join(cell_slug(cell));
        if format.includes(Format::Csv) {
            write(stem.with_extension("csv"), r.confusion.to_csv().as_bytes(), &mut written)?;
        }
        if format.includes(Format::Png) {
            let path = stem.with_extension("png");
            let mut bytes = Vec::new();
            heatmap(&r.confusion)
                .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
                .map_err(|e| ExpError::Results {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
            write(path, &bytes, &mut written)?;
        }
    }
    Ok(written)
}

const CELL: u32 = 48;
const MARGIN: u32 = 20;
const GLYPH_SCALE: u32 = 2;

/// 3×5 bitmaps, one row per `u8` (low three bits, left pixel highest).
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        'A' => [2, 5, 7, 5, 5],
        'D' => [6, 5, 5, 5, 6],
        'E' => [7, 4, 6, 4, 7],
        'F' => [7, 4, 6, 4, 4],
        'H' => [5, 5, 7, 5, 5],
        'I' => [7, 2, 2, 2, 7],
        'N' => [5, 7, 7, 7, 5],
        'S' => [7, 4, 7, 1, 7],
        'U' => [5, 5, 5, 5, 7],
        _ => [0; 5],
    }
}

fn draw_text(img: &mut RgbImage, text: &str, cx: u32, cy: u32, color: Rgb<u8>) {
    let advance = 4 * GLYPH_SCALE;
    let width = text.len() as u32 * advance - GLYPH_SCALE;
    let x0 = cx.saturating_sub(width / 2);
    let y0 = cy.saturating_sub(5 * GLYPH_SCALE / 2);
    for (i, ch) in text.chars().enumerate() {
        for (row, bits) in glyph(ch).iter().enumerate() {
            for col in 0..3u32 {
                if bits & (4 >> col) == 0 {
                    continue;
                }
                for dy in 0..GLYPH_SCALE {
                    for dx in 0..GLYPH_SCALE {
                        let x = x0 + i as u32 * advance + col * GLYPH_SCALE + dx;
                        let y = y0 + row as u32 * GLYPH_SCALE + dy;
                        if x < img.width() && y < img.height() {
                            img.put_pixel(x, y, color);
                        }
                    }
                }
            }
        }
    }
}

fn abbreviation(label: EmotionLabel) -> String {
    label.name().to_ascii_uppercase().chars().take(2).collect()
}

/// Confusion heatmap: rows are true labels, columns predictions, shade is
/// the row-normalized fraction and each cell shows its count.
pub fn heatmap(m: &ConfusionMatrix) -> RgbImage {
    let side = MARGIN + CELL * NUM_CLASSES as u32;
    let mut img: RgbImage = ImageBuffer::from_pixel(side, side, Rgb([255, 255, 255]));
    let black = Rgb([0, 0, 0]);
    for label in EmotionLabel::ALL {
        let center = MARGIN + CELL * label.index() as u32 + CELL / 2;
        draw_text(&mut img, &abbreviation(label), center, MARGIN / 2, black);
        draw_text(&mut img, &abbreviation(label), MARGIN / 2, center, black);
    }
    for t in 0..NUM_CLASSES {
        let row_sum = m.row_sum(t);
        for p in 0..NUM_CLASSES {
            let count = m.get(t, p);
            let frac = if row_sum == 0 { 0.0 } else { count as f64 / row_sum as f64 };
            let shade = |lo: f64, hi: f64| (lo + (hi - lo) * frac).round() as u8;
            let color = Rgb([shade(247.0, 8.0), shade(251.0, 48.0), shade(255.0, 107.0)]);
            let (x0, y0) = (MARGIN + CELL * p as u32, MARGIN + CELL * t as u32);
            for y in y0..y0 + CELL {
                for x in x0..x0 + CELL {
                    let edge = x == x0 || y == y0;
                    img.put_pixel(x, y, if edge { Rgb([200, 200, 200]) } else { color });
                }
            }
            let ink = if frac > 0.5 { Rgb([255, 255, 255]) } else { black };
            draw_text(&mut img, &count.to_string(), x0 + CELL / 2, y0 + CELL / 2, ink);
        }
    }
    img
}
