use super::LandmarkSet;
use crate::datasets::{ImageSample, Variant};
use crate::frame::GrayFrame;

/// Rectangle kept around each landmark, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSize {
    pub width: usize,
    pub height: usize,
}

impl Default for MaskSize {
    fn default() -> Self {
        Self {
            width: 10,
            height: 14,
        }
    }
}

/// Half-open index range `[center − ⌊extent/2⌋, center − ⌊extent/2⌋ + extent)`
/// clipped to `[0, len)`. For even extents the center sits at the start of
/// the upper half: extent 10 around 0 keeps indices 0..=4.
pub fn rect_span(center: usize, extent: usize, len: usize) -> std::ops::Range<usize> {
    let start = center as isize - (extent / 2) as isize;
    let end = start + extent as isize;
    let clip = |v: isize| v.clamp(0, len as isize) as usize;
    clip(start)..clip(end)
}

/// Keeps pixels inside the union of `size` rectangles centered on each
/// `(row, col)`; every other pixel becomes 0.
pub fn mask_rectangles(frame: &GrayFrame, centers: &[(usize, usize)], size: MaskSize) -> GrayFrame {
    let (w, h) = (frame.width(), frame.height());
    let mut keep = vec![false; w * h];
    for &(row, col) in centers {
        for r in rect_span(row, size.height, h) {
            for c in rect_span(col, size.width, w) {
                keep[r * w + c] = true;
            }
        }
    }
    let data = frame
        .data()
        .iter()
        .zip(&keep)
        .map(|(&v, &k)| if k { v } else { 0 })
        .collect();
    GrayFrame::new(w, h, data).expect("same dimensions")
}

/// Builds the cropped variant from an aligned sample and landmarks already
/// mapped into its 48×48 frame. Missing landmarks discard the sample.
pub fn landmark_mask(
    aligned: &ImageSample,
    landmarks: Option<&LandmarkSet>,
    size: MaskSize,
) -> Result<ImageSample, String> {
    let lm = landmarks.ok_or_else(|| "no landmarks for the cropped variant".to_string())?;
    let (w, h) = (aligned.pixels.width(), aligned.pixels.height());
    let centers: Vec<_> = lm.points().iter().map(|p| p.pixel(w, h)).collect();
    let mut out = aligned.clone();
    out.pixels = mask_rectangles(&aligned.pixels, &centers, size);
    out.variant = Variant::Cropped;
    Ok(out)
}
