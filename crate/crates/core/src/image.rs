//! Linear RGB float images and display encoding.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Rgb;

/// Display gamma used for PNG output and for image metrics.
pub const DISPLAY_GAMMA: f64 = 2.2;

#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub data: Vec<Rgb<f32>>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![Rgb::zero(); width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb<f32>) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb<f32> {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Rgb<f32>) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_dims(&self, other: &RgbImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Exposure-scaled, gamma-encoded values clamped to `[0, 1]`.
    pub fn display_encoded(&self, exposure: f64) -> Vec<[f64; 3]> {
        self.data
            .iter()
            .map(|p| {
                let enc = |v: f32| encode_display(v as f64 * exposure);
                [enc(p.r), enc(p.g), enc(p.b)]
            })
            .collect()
    }

    /// Writes an 8-bit sRGB-style PNG using `exposure` and gamma 2.2.
    pub fn save_png(&self, path: impl AsRef<Path>, exposure: f64) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::ImageDecode(e.to_string()))?;
        let bytes: Vec<u8> = self
            .display_encoded(exposure)
            .iter()
            .flat_map(|px| px.map(|v| (v * 255.0).round() as u8))
            .collect();
        writer.write_image_data(&bytes).map_err(|e| Error::ImageDecode(e.to_string()))?;
        writer.finish().map_err(|e| Error::ImageDecode(e.to_string()))?;
        Ok(())
    }

    /// Horizontal strip of equally sized images.
    pub fn hstack(images: &[RgbImage]) -> RgbImage {
        let height = images.iter().map(|i| i.height).max().unwrap_or(0);
        let width = images.iter().map(|i| i.width).sum();
        let mut out = RgbImage::new(width, height);
        let mut x0 = 0;
        for img in images {
            for y in 0..img.height {
                for x in 0..img.width {
                    out.set(x0 + x, y, img.get(x, y));
                }
            }
            x0 += img.width;
        }
        out
    }

    pub fn vstack(images: &[RgbImage]) -> RgbImage {
        let width = images.iter().map(|i| i.width).max().unwrap_or(0);
        let height = images.iter().map(|i| i.height).sum();
        let mut out = RgbImage::new(width, height);
        let mut y0 = 0;
        for img in images {
            for y in 0..img.height {
                for x in 0..img.width {
                    out.set(x, y0 + y, img.get(x, y));
                }
            }
            y0 += img.height;
        }
        out
    }
}

/// Linear value to display value in `[0, 1]`.
#[inline]
pub fn encode_display(v: f64) -> f64 {
    if v.is_nan() || v <= 0.0 {
        0.0
    } else {
        v.min(1.0).powf(1.0 / DISPLAY_GAMMA)
    }
}

/// Variance of the 4-neighbour Laplacian of the luminance of the display-encoded image.
pub fn laplacian_variance(img: &RgbImage, exposure: f64) -> f64 {
    if img.width < 3 || img.height < 3 {
        return 0.0;
    }
    let enc = img.display_encoded(exposure);
    let lum: Vec<f64> = enc.iter().map(|p| 0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]).collect();
    let w = img.width;
    let mut values = Vec::with_capacity((img.width - 2) * (img.height - 2));
    for y in 1..img.height - 1 {
        for x in 1..w - 1 {
            let c = lum[y * w + x];
            let l = lum[y * w + x - 1] + lum[y * w + x + 1] + lum[(y - 1) * w + x] + lum[(y + 1) * w + x] - 4.0 * c;
            values.push(l);
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_encoding_clamps_and_applies_gamma() {
        assert_eq!(encode_display(-1.0), 0.0);
        assert_eq!(encode_display(4.0), 1.0);
        assert!((encode_display(0.5) - 0.5f64.powf(1.0 / 2.2)).abs() < 1e-12);
    }

    #[test]
    fn laplacian_variance_is_zero_for_flat_images() {
        let img = RgbImage::from_fn(8, 8, |_, _| Rgb::splat(0.3));
        assert_eq!(laplacian_variance(&img, 1.0), 0.0);
        let checker = RgbImage::from_fn(8, 8, |x, y| Rgb::splat(((x + y) % 2) as f32));
        assert!(laplacian_variance(&checker, 1.0) > 1.0);
    }
}
