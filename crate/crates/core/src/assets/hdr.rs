//! Equirectangular environment maps and the Radiance RGBE file format.
//!
//! Row 0 is the +Y pole; column 0 is azimuth 0 (+X). Files use the standard
//! `-Y rows +X cols` resolution line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::lighting::{dir_to_equirect, equirect_to_dir};
use crate::math::{Rgb, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct RadianceMap {
    pub image: RgbImage,
}

impl RadianceMap {
    pub fn new(image: RgbImage) -> Self {
        Self { image }
    }

    pub fn constant(rows: usize, cols: usize, value: Rgb<f32>) -> Self {
        Self::new(RgbImage::from_fn(cols, rows, |_, _| value))
    }

    /// Map whose pixel at direction `d` is `f(d)` (evaluated at pixel centres).
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(Vec3<f64>) -> Rgb<f64>) -> Self {
        Self::new(RgbImage::from_fn(cols, rows, |c, r| {
            let v = f(pixel_direction(rows, cols, r, c));
            Rgb::new(v.r as f32, v.g as f32, v.b as f32)
        }))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.image.height
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.image.width
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> Rgb<f64> {
        self.image.get(col, row).to_f64()
    }

    #[inline]
    pub fn direction(&self, row: usize, col: usize) -> Vec3<f64> {
        pixel_direction(self.rows(), self.cols(), row, col)
    }

    /// Exact solid angle of a pixel in `row`.
    #[inline]
    pub fn solid_angle(&self, row: usize) -> f64 {
        pixel_solid_angle(self.rows(), self.cols(), row)
    }

    /// Bilinear radiance lookup (azimuth wraps, polar angle clamps).
    pub fn lookup(&self, dir: Vec3<f64>) -> Rgb<f64> {
        let (u, v) = dir_to_equirect(dir);
        self.sample_uv(u, v)
    }

    pub fn sample_uv(&self, u: f64, v: f64) -> Rgb<f64> {
        let rows = self.rows();
        let cols = self.cols();
        let x = u * cols as f64 - 0.5;
        let y = (v * rows as f64 - 0.5).clamp(0.0, (rows - 1) as f64);
        let xf = x.floor();
        let fx = x - xf;
        let x0 = (xf as i64).rem_euclid(cols as i64) as usize;
        let x1 = (x0 + 1) % cols;
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(rows - 1);
        let fy = y - y0 as f64;
        let top = self.pixel(y0, x0) * (1.0 - fx) + self.pixel(y0, x1) * fx;
        let bottom = self.pixel(y1, x0) * (1.0 - fx) + self.pixel(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// `Σ L(p) Δω_p` per channel.
    pub fn total_power(&self) -> Rgb<f64> {
        let mut sum = Rgb::zero();
        for r in 0..self.rows() {
            let dw = self.solid_angle(r);
            let mut row = Rgb::zero();
            for c in 0..self.cols() {
                row += self.pixel(r, c);
            }
            sum += row * dw;
        }
        sum
    }

    pub fn is_finite_nonnegative(&self) -> bool {
        self.image.data.iter().all(|p| p.is_finite() && p.r >= 0.0 && p.g >= 0.0 && p.b >= 0.0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        read_rgbe(&mut BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_rgbe(&mut w, &self.image).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[inline]
pub fn pixel_direction(rows: usize, cols: usize, row: usize, col: usize) -> Vec3<f64> {
    equirect_to_dir((col as f64 + 0.5) / cols as f64, (row as f64 + 0.5) / rows as f64)
}

#[inline]
pub fn pixel_solid_angle(rows: usize, cols: usize, row: usize) -> f64 {
    let t0 = std::f64::consts::PI * row as f64 / rows as f64;
    let t1 = std::f64::consts::PI * (row + 1) as f64 / rows as f64;
    (2.0 * std::f64::consts::PI / cols as f64) * (t0.cos() - t1.cos())
}

/// RGBE to linear: `mantissa / 256 * 2^(exponent - 128)`, zero exponent is black.
#[inline]
pub fn rgbe_to_rgb(px: [u8; 4]) -> Rgb<f32> {
    if px[3] == 0 {
        return Rgb::zero();
    }
    let f = 2f64.powi(px[3] as i32 - 136);
    Rgb::new((px[0] as f64 * f) as f32, (px[1] as f64 * f) as f32, (px[2] as f64 * f) as f32)
}

pub fn rgb_to_rgbe(c: Rgb<f32>) -> [u8; 4] {
    let v = c.r.max(c.g).max(c.b) as f64;
    if !(v > 1e-32) || !v.is_finite() {
        return [0, 0, 0, 0];
    }
    // v = m * 2^e with m in [0.5, 1)
    let mut e = v.log2().floor() as i32 + 1;
    let mut scale = 256.0 / 2f64.powi(e);
    if (v * scale).round() >= 256.0 {
        e += 1;
        scale *= 0.5;
    }
    if e + 128 > 255 {
        return [255, 255, 255, 255];
    }
    if e + 128 < 1 {
        return [0, 0, 0, 0];
    }
    let q = |x: f32| ((x.max(0.0) as f64) * scale).round().min(255.0) as u8;
    [q(c.r), q(c.g), q(c.b), (e + 128) as u8]
}

fn read_line<R: BufRead>(r: &mut R) -> Result<Option<String>> {
    let mut buf = Vec::new();
    let n = r.read_until(b'\n', &mut buf).map_err(|e| Error::HdrHeader(e.to_string()))?;
    if n == 0 {
        return Ok(None);
    }
    while buf.last() == Some(&b'\n') || buf.last() == Some(&b'\r') {
        buf.pop();
    }
    Ok(Some(String::from_utf8_lossy(&buf).into_owned()))
}

pub fn read_rgbe<R: BufRead>(r: &mut R) -> Result<RadianceMap> {
    let magic = read_line(r)?.ok_or(Error::BadHdrMagic)?;
    if !(magic.starts_with("#?RADIANCE") || magic.starts_with("#?RGBE")) {
        return Err(Error::BadHdrMagic);
    }
    loop {
        let line = read_line(r)?.ok_or_else(|| Error::HdrHeader("missing resolution line".into()))?;
        if line.is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(Error::HdrHeader(format!("unsupported format {fmt}")));
            }
        }
    }
    let res = read_line(r)?.ok_or_else(|| Error::HdrHeader("missing resolution line".into()))?;
    let parts: Vec<&str> = res.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "-Y" || parts[2] != "+X" {
        return Err(Error::HdrHeader(format!("unsupported orientation '{res}'")));
    }
    let rows: usize = parts[1].parse().map_err(|_| Error::HdrHeader(format!("bad height in '{res}'")))?;
    let cols: usize = parts[3].parse().map_err(|_| Error::HdrHeader(format!("bad width in '{res}'")))?;
    if rows == 0 || cols == 0 {
        return Err(Error::HdrHeader("zero-sized image".into()));
    }
    let mut image = RgbImage::new(cols, rows);
    let mut scan = vec![[0u8; 4]; cols];
    for row in 0..rows {
        read_scanline(r, &mut scan, row)?;
        for (c, px) in scan.iter().enumerate() {
            image.set(c, row, rgbe_to_rgb(*px));
        }
    }
    Ok(RadianceMap::new(image))
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], row: usize) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::TruncatedScanline { row })
}

fn read_scanline<R: BufRead>(r: &mut R, scan: &mut [[u8; 4]], row: usize) -> Result<()> {
    let cols = scan.len();
    let mut head = [0u8; 4];
    read_exact_or_truncated(r, &mut head, row)?;
    let rle = (8..=0x7fff).contains(&cols) && head[0] == 2 && head[1] == 2 && head[2] & 0x80 == 0;
    if !rle {
        scan[0] = head;
        for px in scan.iter_mut().skip(1) {
            read_exact_or_truncated(r, px, row)?;
        }
        return Ok(());
    }
    let width = ((head[2] as usize) << 8) | head[3] as usize;
    if width != cols {
        return Err(Error::HdrHeader(format!("scanline width {width} != {cols}")));
    }
    for channel in 0..4 {
        let mut x = 0;
        while x < cols {
            let mut count = [0u8; 1];
            read_exact_or_truncated(r, &mut count, row)?;
            let count = count[0] as usize;
            if count > 128 {
                let run = count - 128;
                if x + run > cols {
                    return Err(Error::HdrHeader(format!("run overflows scanline {row}")));
                }
                let mut val = [0u8; 1];
                read_exact_or_truncated(r, &mut val, row)?;
                for px in &mut scan[x..x + run] {
                    px[channel] = val[0];
                }
                x += run;
            } else {
                if count == 0 || x + count > cols {
                    return Err(Error::HdrHeader(format!("bad literal run in scanline {row}")));
                }
                let mut vals = vec![0u8; count];
                read_exact_or_truncated(r, &mut vals, row)?;
                for (px, v) in scan[x..x + count].iter_mut().zip(vals) {
                    px[channel] = v;
                }
                x += count;
            }
        }
    }
    Ok(())
}

/// Writes run-length encoded scanlines (flat encoding for widths outside RLE range).
pub fn write_rgbe<W: Write>(w: &mut W, image: &RgbImage) -> std::io::Result<()> {
    writeln!(w, "#?RADIANCE")?;
    writeln!(w, "FORMAT=32-bit_rle_rgbe")?;
    writeln!(w)?;
    writeln!(w, "-Y {} +X {}", image.height, image.width)?;
    let cols = image.width;
    for row in 0..image.height {
        let scan: Vec<[u8; 4]> = (0..cols).map(|c| rgb_to_rgbe(image.get(c, row))).collect();
        if !(8..=0x7fff).contains(&cols) {
            for px in &scan {
                w.write_all(px)?;
            }
            continue;
        }
        w.write_all(&[2, 2, (cols >> 8) as u8, (cols & 0xff) as u8])?;
        for channel in 0..4 {
            let data: Vec<u8> = scan.iter().map(|p| p[channel]).collect();
            write_rle_channel(w, &data)?;
        }
    }
    Ok(())
}

fn write_rle_channel<W: Write>(w: &mut W, data: &[u8]) -> std::io::Result<()> {
    let mut i = 0;
    while i < data.len() {
        let mut run = 1;
        while i + run < data.len() && run < 127 && data[i + run] == data[i] {
            run += 1;
        }
        if run >= 3 {
            w.write_all(&[128 + run as u8, data[i]])?;
            i += run;
            continue;
        }
        // literal block up to the next run of 3
        let start = i;
        let mut end = i;
        while end < data.len() && end - start < 128 {
            if end + 2 < data.len() && data[end] == data[end + 1] && data[end] == data[end + 2] {
                break;
            }
            end += 1;
        }
        w.write_all(&[(end - start) as u8])?;
        w.write_all(&data[start..end])?;
        i = end;
    }
    Ok(())
}
