//! Face detection behind an adapter, alignment, landmark masking and the
//! augmented merged dataset (original + aligned + cropped variants).

mod align;
mod cache;
mod detector;
mod mask;
mod merged;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align, AlignTransform, Aligned};
pub use cache::DetectionCache;
pub use detector::{detect, DetectRequest, ExternalDetector, FaceDetector, FixtureDetector};
pub use mask::{landmark_mask, mask_rectangles, rect_span, MaskSize};
pub use merged::{build_augmented_merged, derive_variants, Discard, VariantSet};

/// A point in continuous image coordinates; pixel `(row, col)` covers
/// `[col, col+1) × [row, row+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// `(row, col)` of the containing pixel, clipped into a
    /// `width × height` image.
    pub fn pixel(self, width: usize, height: usize) -> (usize, usize) {
        let clip = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (clip(self.y, height), clip(self.x, width))
    }
}

/// The five detector landmarks. "Right" is the subject's right, which
/// usually appears on the image left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub right_eye: Point,
    pub left_eye: Point,
    pub nose: Point,
    pub mouth_right: Point,
    pub mouth_left: Point,
}

impl LandmarkSet {
    pub fn points(&self) -> [Point; 5] {
        [
            self.right_eye,
            self.left_eye,
            self.nose,
            self.mouth_right,
            self.mouth_left,
        ]
    }

    pub fn from_points(p: [Point; 5]) -> Self {
        Self {
            right_eye: p[0],
            left_eye: p[1],
            nose: p[2],
            mouth_right: p[3],
            mouth_left: p[4],
        }
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Self {
        Self::from_points(self.points().map(f))
    }

    pub fn is_finite(&self) -> bool {
        self.points().iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }
}

/// Axis-aligned box `[x, x+w) × [y, y+h)` in source pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Intersection with the `width × height` image, or `None` when empty.
    pub fn clip(&self, width: usize, height: usize) -> Option<BoundingBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.w).min(width as f64);
        let y1 = (self.y + self.h).min(height as f64);
        (x1 > x0 && y1 > y0).then(|| BoundingBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceDetection {
    pub bbox: BoundingBox,
    pub landmarks: Option<LandmarkSet>,
    pub confidence: f64,
}

impl FaceDetection {
    pub fn validate(&self) -> Result<(), String> {
        let b = &self.bbox;
        if ![b.x, b.y, b.w, b.h, self.confidence]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err("non-finite detection field".into());
        }
        if b.w <= 0.0 || b.h <= 0.0 {
            return Err(format!("non-positive box size {}x{}", b.w, b.h));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0,1]", self.confidence));
        }
        if let Some(lm) = &self.landmarks {
            if !lm.is_finite() {
                return Err("non-finite landmark".into());
            }
        }
        Ok(())
    }
}

/// Failure to obtain a detection. Distinct from "no face found", which is
/// `Ok(None)`; every variant is worth retrying later.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DetectError {
    #[error("no cached detection for {source_id}/{key} and no live detector configured")]
    Unavailable { source_id: String, key: String },
    #[error("detector failed: {0}")]
    Adapter(String),
}

impl DetectError {
    pub fn is_retriable(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_handles_partial_and_disjoint_boxes() {
        let b = BoundingBox {
            x: -5.0,
            y: 40.0,
            w: 20.0,
            h: 20.0,
        };
        assert_eq!(
            b.clip(48, 48),
            Some(BoundingBox {
                x: 0.0,
                y: 40.0,
                w: 15.0,
                h: 8.0
            })
        );
        let outside = BoundingBox {
            x: 60.0,
            y: 0.0,
            w: 5.0,
            h: 5.0,
        };
        assert_eq!(outside.clip(48, 48), None);
    }

    #[test]
    fn pixel_of_point_is_clipped() {
        assert_eq!(Point::new(24.7, 3.2).pixel(48, 48), (3, 24));
        assert_eq!(Point::new(-3.0, 99.0).pixel(48, 48), (47, 0));
    }

    #[test]
    fn validate_rejects_bad_detections() {
        let mut d = FaceDetection {
            bbox: BoundingBox {
                x: 0.0,
                y: 0.0,
                w: 10.0,
                h: 10.0,
            },
            landmarks: None,
            confidence: 0.9,
        };
        assert!(d.validate().is_ok());
        d.confidence = 1.5;
        assert!(d.validate().is_err());
        d.confidence = 0.5;
        d.bbox.w = 0.0;
        assert!(d.validate().is_err());
    }
}
