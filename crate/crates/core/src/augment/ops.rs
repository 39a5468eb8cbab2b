//! Per-op kernels. Geometric ops use nearest-neighbour inverse mapping about
//! the image center and fill exposed pixels with 0; photometric blends round
//! to nearest and saturate.

use super::AugOp;
use crate::frame::{to_u8, GrayFrame};

/// Applies `op` with its already-mapped, already-signed parameter.
pub fn apply_op(img: &GrayFrame, op: AugOp, param: f64) -> GrayFrame {
    match op {
        AugOp::Identity => img.clone(),
        AugOp::Rotate => {
            let (s, c) = param.to_radians().sin_cos();
            warp(img, |dx, dy| (c * dx - s * dy, s * dx + c * dy))
        }
        AugOp::TranslateX => warp(img, |dx, dy| (dx - param, dy)),
        AugOp::TranslateY => warp(img, |dx, dy| (dx, dy - param)),
        AugOp::ShearX => warp(img, |dx, dy| (dx + param * dy, dy)),
        AugOp::ShearY => warp(img, |dx, dy| (dx, dy + param * dx)),
        AugOp::Brightness => map(img, |v| v as f64 * (1.0 + param)),
        AugOp::Contrast => {
            let mean = img.data().iter().map(|&v| v as f64).sum::<f64>() / img.data().len() as f64;
            map(img, |v| mean + (v as f64 - mean) * (1.0 + param))
        }
        AugOp::Sharpness => sharpness(img, 1.0 + param),
        AugOp::Equalize => equalize(img),
        AugOp::Autocontrast => autocontrast(img),
        AugOp::Posterize => {
            let bits = (param.round() as i64).clamp(1, 8) as u32;
            let mask = !((1u16 << (8 - bits)) - 1) as u8;
            map(img, |v| (v & mask) as f64)
        }
        AugOp::Solarize => map(img, |v| {
            if (v as f64) >= param {
                255.0 - v as f64
            } else {
                v as f64
            }
        }),
    }
}

fn map(img: &GrayFrame, f: impl Fn(u8) -> f64) -> GrayFrame {
    let data = img.data().iter().map(|&v| to_u8(f(v))).collect();
    GrayFrame::new(img.width(), img.height(), data).expect("same dimensions")
}

/// `inverse` maps an output offset from the center to a source offset.
fn warp(img: &GrayFrame, inverse: impl Fn(f64, f64) -> (f64, f64)) -> GrayFrame {
    let (w, h) = (img.width(), img.height());
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    GrayFrame::from_fn(w, h, |r, c| {
        let (sx, sy) = inverse(c as f64 + 0.5 - cx, r as f64 + 0.5 - cy);
        let (x, y) = ((sx + cx).floor(), (sy + cy).floor());
        if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
            0
        } else {
            img.get(y as usize, x as usize)
        }
    })
}

/// Blend with a 3×3 smoothed copy (center weight 5, neighbours 1, /13);
/// border pixels of the smoothed copy equal the input.
fn sharpness(img: &GrayFrame, factor: f64) -> GrayFrame {
    let (w, h) = (img.width(), img.height());
    GrayFrame::from_fn(w, h, |r, c| {
        let v = img.get(r, c) as f64;
        if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
            return to_u8(v);
        }
        let mut acc = 0.0;
        for dr in 0..3 {
            for dc in 0..3 {
                let weight = if dr == 1 && dc == 1 { 5.0 } else { 1.0 };
                acc += weight * img.get(r + dr - 1, c + dc - 1) as f64;
            }
        }
        let smooth = (acc / 13.0).round();
        to_u8(smooth + factor * (v - smooth))
    })
}

fn equalize(img: &GrayFrame) -> GrayFrame {
    let mut hist = [0usize; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let last = hist.iter().rposition(|&n| n > 0).map(|i| hist[i]).unwrap_or(0);
    let step = (img.data().len() - last) / 255;
    if step == 0 {
        return img.clone();
    }
    let mut lut = [0u8; 256];
    let mut n = step / 2;
    for (i, count) in hist.iter().enumerate() {
        lut[i] = (n / step).min(255) as u8;
        n += count;
    }
    map(img, |v| lut[v as usize] as f64)
}

fn autocontrast(img: &GrayFrame) -> GrayFrame {
    let lo = *img.data().iter().min().expect("non-empty image");
    let hi = *img.data().iter().max().expect("non-empty image");
    if hi <= lo {
        return img.clone();
    }
    let scale = 255.0 / (hi - lo) as f64;
    map(img, |v| (v - lo) as f64 * scale)
}
