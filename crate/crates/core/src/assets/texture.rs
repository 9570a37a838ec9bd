use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::math::{Rgb, Vec3};

/// How integer texel values are mapped to linear floats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ColorSpace {
    /// Values are used as stored (normal maps, data textures).
    #[default]
    Linear,
    /// Values are sRGB-encoded and decoded to linear on load (albedo maps).
    SrgbDecoded,
}

/// Orthonormal tangent / bitangent / normal frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub tangent: Vec3<f64>,
    pub bitangent: Vec3<f64>,
    pub normal: Vec3<f64>,
}

impl Frame {
    pub fn identity() -> Self {
        Self {
            tangent: Vec3::new(1.0, 0.0, 0.0),
            bitangent: Vec3::new(0.0, 1.0, 0.0),
            normal: Vec3::new(0.0, 0.0, 1.0),
        }
    }

    /// Frame around `normal`, with the tangent taken from `tangent_hint` by Gram-Schmidt.
    pub fn from_normal_tangent(normal: Vec3<f64>, tangent_hint: Vec3<f64>) -> Self {
        let n = normal.normalized();
        let mut t = tangent_hint - n * n.dot(tangent_hint);
        if t.length_squared() < 1e-20 {
            t = n.any_orthonormal();
        } else {
            t = t.normalized();
        }
        Self { tangent: t, bitangent: n.cross(t), normal: n }
    }

    #[inline]
    pub fn to_world(&self, v: Vec3<f64>) -> Vec3<f64> {
        self.tangent * v.x + self.bitangent * v.y + self.normal * v.z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextureMap {
    pub image: RgbImage,
    pub colorspace: ColorSpace,
}

/// Standard sRGB electro-optical transfer function.
#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

impl TextureMap {
    pub fn new(image: RgbImage, colorspace: ColorSpace) -> Self {
        Self { image, colorspace }
    }

    pub fn constant(value: Rgb<f32>) -> Self {
        Self::new(RgbImage::from_fn(1, 1, |_, _| value), ColorSpace::Linear)
    }

    /// Flat tangent-space normal map (every texel decodes to +Z).
    pub fn flat_normal_map() -> Self {
        Self::constant(Rgb::new(0.5, 0.5, 1.0))
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    /// Bilinear lookup. `v = 0` is the bottom row; coordinates outside the unit
    /// square are clamped to the edge.
    pub fn sample(&self, uv: [f64; 2]) -> Rgb<f64> {
        let w = self.image.width;
        let h = self.image.height;
        let u = uv[0].clamp(0.0, 1.0);
        let v = uv[1].clamp(0.0, 1.0);
        let x = (u * w as f64 - 0.5).clamp(0.0, (w - 1) as f64);
        let y = ((1.0 - v) * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p = |xx, yy| self.image.get(xx, yy).to_f64();
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Loads an 8- or 16-bit RGB/RGBA PNG; alpha is dropped.
    pub fn load(path: impl AsRef<Path>, colorspace: ColorSpace) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let mut reader = decoder.read_info().map_err(|e| Error::ImageDecode(e.to_string()))?;
        let info = reader.info();
        let depth = info.bit_depth as u8;
        if depth != 8 && depth != 16 {
            return Err(Error::UnsupportedBitDepth(depth));
        }
        let channels = match info.color_type {
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            other => return Err(Error::UnsupportedChannels(format!("{other:?}"))),
        };
        let (width, height) = (info.width as usize, info.height as usize);
        let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| Error::ImageDecode("image too large".into()))?];
        let frame = reader.next_frame(&mut buf).map_err(|e| Error::ImageDecode(e.to_string()))?;
        let bytes = &buf[..frame.buffer_size()];
        let bytes_per_sample = (depth / 8) as usize;
        let max = if depth == 8 { 255.0 } else { 65535.0 };
        let sample = |i: usize| -> f64 {
            let raw = if bytes_per_sample == 1 {
                bytes[i] as f64
            } else {
                u16::from_be_bytes([bytes[2 * i], bytes[2 * i + 1]]) as f64
            };
            let v = raw / max;
            match colorspace {
                ColorSpace::Linear => v,
                ColorSpace::SrgbDecoded => srgb_to_linear(v),
            }
        };
        let image = RgbImage::from_fn(width, height, |x, y| {
            let base = (y * width + x) * channels;
            Rgb::new(sample(base) as f32, sample(base + 1) as f32, sample(base + 2) as f32)
        });
        Ok(Self { image, colorspace })
    }

    /// Writes the raw texel values as an 8-bit PNG (no encoding applied).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder =
            png::Encoder::new(std::io::BufWriter::new(file), self.image.width as u32, self.image.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::ImageDecode(e.to_string()))?;
        let encode = |v: f32| -> u8 {
            let v = v.clamp(0.0, 1.0) as f64;
            let v = match self.colorspace {
                ColorSpace::Linear => v,
                ColorSpace::SrgbDecoded => linear_to_srgb(v),
            };
            (v * 255.0).round() as u8
        };
        let bytes: Vec<u8> =
            self.image.data.iter().flat_map(|p| [encode(p.r), encode(p.g), encode(p.b)]).collect();
        writer.write_image_data(&bytes).map_err(|e| Error::ImageDecode(e.to_string()))?;
        writer.finish().map_err(|e| Error::ImageDecode(e.to_string()))
    }
}

#[inline]
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Decodes a tangent-space normal-map texel into a world-space unit normal.
///
/// Falls back to `frame.normal` when the texel decodes to (nearly) zero length.
pub fn decode_normal(rgb: Rgb<f64>, frame: &Frame) -> Vec3<f64> {
    let local = Vec3::new(2.0 * rgb.r - 1.0, 2.0 * rgb.g - 1.0, 2.0 * rgb.b - 1.0);
    if local.length() < 1e-3 {
        return frame.normal.normalized();
    }
    let world = frame.to_world(local.normalized());
    if world.length_squared() < 1e-12 {
        frame.normal.normalized()
    } else {
        world.normalized()
    }
}
