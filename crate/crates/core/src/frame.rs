use std::path::Path;

use crate::error::{Error, Result};

/// Side length of a canonical sample.
pub const SIDE: usize = 48;

/// Luma weights for RGB → gray conversion.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major 8-bit single-channel image.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayFrame({}x{})", self.width, self.height)
    }
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} bytes for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Interleaved RGB to gray with the fixed luma weights, rounded to nearest.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "{} bytes for a {width}x{height} RGB image",
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| {
                let y = LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_canonical(&self) -> bool {
        self.width == SIDE && self.height == SIDE
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    /// Bilinear sample at index-space coordinates (`x` = column, `y` = row),
    /// clamping to the border pixels.
    pub fn sample_clamped(&self, x: f64, y: f64) -> f64 {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        let x = x.clamp(0.0, xmax);
        let y = y.clamp(0.0, ymax);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = x - x0 as f64;
        let ty = y - y0 as f64;
        let top = self.get(y0, x0) as f64 * (1.0 - tx) + self.get(y0, x1) as f64 * tx;
        let bottom = self.get(y1, x0) as f64 * (1.0 - tx) + self.get(y1, x1) as f64 * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Bilinear resize with half-pixel centers (no antialiasing).
    ///
    /// Output pixel `u` samples source coordinate `(u + 0.5) · in/out − 0.5`,
    /// so a same-size resize is the identity.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> GrayFrame {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        GrayFrame::from_fn(width, height, |r, c| {
            let x = (c as f64 + 0.5) * sx - 0.5;
            let y = (r as f64 + 0.5) * sy - 0.5;
            to_u8(self.sample_clamped(x, y))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let gray = img.to_luma8();
        let (w, h) = gray.dimensions();
        GrayFrame::new(w as usize, h as usize, gray.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer size matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_resize_is_identity() {
        let f = GrayFrame::from_fn(48, 48, |r, c| ((r * 7 + c * 13) % 256) as u8);
        assert_eq!(f.resize_bilinear(48, 48), f);
    }

    #[test]
    fn halving_averages_two_by_two_blocks() {
        let f = GrayFrame::from_fn(4, 4, |r, c| (r * 4 + c) as u8 * 10);
        let h = f.resize_bilinear(2, 2);
        // block (0,0): 0,10,40,50 -> 25
        assert_eq!(h.get(0, 0), 25);
        assert_eq!(h.get(1, 1), ((100 + 110 + 140 + 150) / 4) as u8);
    }

    #[test]
    fn luma_of_equal_channels_is_identity() {
        let rgb = vec![100u8; 5 * 3 * 3];
        let g = GrayFrame::from_rgb(5, 3, &rgb).unwrap();
        assert!(g.data().iter().all(|&v| v == 100));
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(GrayFrame::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayFrame::new(0, 2, vec![]).is_err());
    }
}
