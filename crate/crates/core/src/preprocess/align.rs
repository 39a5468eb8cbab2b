use super::{FaceDetection, LandmarkSet, Point};
use crate::datasets::{ImageSample, Variant};
use crate::frame::{to_u8, GrayFrame, SIDE};

/// Similarity-plus-scale map from source coordinates into the 48×48 aligned
/// frame: translate the crop center to the origin, rotate by `-angle`,
/// scale the crop to 48×48, translate to the frame center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignTransform {
    pub center: Point,
    /// Eye-line angle in radians (image coordinates, y down).
    pub angle: f64,
    pub scale_x: f64,
    pub scale_y: f64,
}

impl AlignTransform {
    pub fn apply(&self, p: Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let rx = c * dx + s * dy;
        let ry = -s * dx + c * dy;
        let half = SIDE as f64 / 2.0;
        Point::new(rx * self.scale_x + half, ry * self.scale_y + half)
    }

    pub fn invert(&self, q: Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        let half = SIDE as f64 / 2.0;
        let rx = (q.x - half) / self.scale_x;
        let ry = (q.y - half) / self.scale_y;
        Point::new(
            c * rx - s * ry + self.center.x,
            s * rx + c * ry + self.center.y,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Aligned {
    pub sample: ImageSample,
    pub transform: AlignTransform,
    /// Detector landmarks mapped into the aligned frame.
    pub landmarks: Option<LandmarkSet>,
}

/// Eye-line angle, taking the eyes left-to-right in the image so a
/// mislabeled pair never turns the face upside down.
fn eye_angle(lm: &LandmarkSet) -> f64 {
    let (a, b) = if lm.right_eye.x <= lm.left_eye.x {
        (lm.right_eye, lm.left_eye)
    } else {
        (lm.left_eye, lm.right_eye)
    };
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// Crops the detection box (clipped to the image), levels the eyes when
/// both eye landmarks are present, and resamples to 48×48. Exposed regions
/// are zero.
///
/// Returns the discard reason when the clipped box has zero area.
pub fn align(sample: &ImageSample, detection: &FaceDetection) -> Result<Aligned, String> {
    let src = &sample.pixels;
    let bbox = detection
        .bbox
        .clip(src.width(), src.height())
        .ok_or_else(|| "detection box does not intersect the image".to_string())?;
    let angle = detection.landmarks.as_ref().map(eye_angle).unwrap_or(0.0);
    let transform = AlignTransform {
        center: Point::new(bbox.x + bbox.w / 2.0, bbox.y + bbox.h / 2.0),
        angle,
        scale_x: SIDE as f64 / bbox.w,
        scale_y: SIDE as f64 / bbox.h,
    };
    let (w, h) = (src.width() as f64, src.height() as f64);
    let pixels = GrayFrame::from_fn(SIDE, SIDE, |r, c| {
        let p = transform.invert(Point::new(c as f64 + 0.5, r as f64 + 0.5));
        if p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
            0
        } else {
            to_u8(src.sample_clamped(p.x - 0.5, p.y - 0.5))
        }
    });
    let mut out = sample.clone();
    out.pixels = pixels;
    out.variant = Variant::Aligned;
    Ok(Aligned {
        sample: out,
        transform,
        landmarks: detection
            .landmarks
            .map(|lm| lm.map(|p| transform.apply(p))),
    })
}
