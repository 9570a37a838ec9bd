//! PSNR and SSIM on display-encoded images.

use crate::error::{Error, Result};
use crate::image::RgbImage;

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct ViewMetrics {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
    pub per_view: Vec<ViewMetrics>,
}

impl MetricsReport {
    /// Averages per-view scores; PSNR is averaged over finite values unless all are infinite.
    pub fn from_views(per_view: Vec<ViewMetrics>) -> Self {
        let n = per_view.len().max(1) as f64;
        let ssim = per_view.iter().map(|v| v.ssim).sum::<f64>() / n;
        let finite: Vec<f64> = per_view.iter().map(|v| v.psnr).filter(|p| p.is_finite()).collect();
        let psnr = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
        Self { psnr, ssim, per_view }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("view psnr ssim\n");
        for v in &self.per_view {
            s.push_str(&format!("{} {} {:.6}\n", v.name, format_psnr(v.psnr), v.ssim));
        }
        s.push_str(&format!("mean {} {:.6}\n", format_psnr(self.psnr), self.ssim));
        s
    }
}

/// `inf` for the identical-image sentinel, two decimals otherwise.
pub fn format_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p:.2}")
    }
}

fn check_dims(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::ShapeMismatch(format!("{}x{} vs {}x{}", a.width, a.height, b.width, b.height)));
    }
    if a.data.is_empty() {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    Ok(())
}

/// PSNR of values already in `[0, 1]`.
pub fn psnr_values(a: &[f64], b: &[f64]) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

fn planes(img: &RgbImage) -> [Vec<f64>; 3] {
    let enc = img.display_encoded(1.0);
    [0, 1, 2].map(|c| enc.iter().map(|p| p[c]).collect())
}

pub fn psnr(rendered: &RgbImage, reference: &RgbImage) -> Result<f64> {
    check_dims(rendered, reference)?;
    let flat = |img: &RgbImage| -> Vec<f64> { img.display_encoded(1.0).into_iter().flatten().collect() };
    Ok(psnr_values(&flat(rendered), &flat(reference)))
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian blur; taps falling outside the image are dropped and the rest renormalized.
fn blur(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = gaussian_kernel();
    let r = (WINDOW / 2) as isize;
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let (mut acc, mut norm) = (0.0, 0.0);
                for (i, kv) in k.iter().enumerate() {
                    let o = i as isize - r;
                    let (xx, yy) = if horizontal { (x as isize + o, y as isize) } else { (x as isize, y as isize + o) };
                    if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                        continue;
                    }
                    acc += kv * src[yy as usize * w + xx as usize];
                    norm += kv;
                }
                out[y * w + x] = acc / norm;
            }
        }
        out
    };
    pass(&pass(plane, true), false)
}

/// Mean SSIM of one channel with values in `[0, 1]`.
pub fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let c1 = (K1 * 1.0f64).powi(2);
    let c2 = (K2 * 1.0f64).powi(2);
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x * y).collect() };
    let mu_a = blur(a, w, h);
    let mu_b = blur(b, w, h);
    let aa = blur(&prod(a, a), w, h);
    let bb = blur(&prod(b, b), w, h);
    let ab = blur(&prod(a, b), w, h);
    let mut sum = 0.0;
    for i in 0..a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    sum / a.len() as f64
}

/// SSIM averaged over the three display-encoded channels.
pub fn ssim(rendered: &RgbImage, reference: &RgbImage) -> Result<f64> {
    check_dims(rendered, reference)?;
    let (pa, pb) = (planes(rendered), planes(reference));
    let (w, h) = (rendered.width, rendered.height);
    Ok((0..3).map(|c| ssim_plane(&pa[c], &pb[c], w, h)).sum::<f64>() / 3.0)
}

pub fn compute_metrics(rendered: &RgbImage, reference: &RgbImage) -> Result<MetricsReport> {
    let v = ViewMetrics { name: "image".into(), psnr: psnr(rendered, reference)?, ssim: ssim(rendered, reference)? };
    Ok(MetricsReport::from_views(vec![v]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rgb;

    fn img(f: impl Fn(usize, usize) -> f32) -> RgbImage {
        RgbImage::from_fn(16, 12, |x, y| Rgb::splat(f(x, y)))
    }

    #[test]
    fn identical_images() {
        let a = img(|x, y| (x * y) as f32 / 200.0);
        let m = compute_metrics(&a, &a).unwrap();
        assert!(m.psnr.is_infinite());
        assert!((m.ssim - 1.0).abs() < 1e-12);
        assert_eq!(format_psnr(m.psnr), "inf");
    }

    #[test]
    fn psnr_of_known_mse() {
        let a = vec![0.5; 100];
        let b = vec![0.6; 100];
        assert!((psnr_values(&a, &b) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_is_symmetric() {
        let a = img(|x, _| x as f32 / 16.0);
        let b = img(|_, y| y as f32 / 12.0);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(psnr(&RgbImage::new(2, 2), &RgbImage::new(3, 2)).is_err());
    }

    #[test]
    fn kernel_is_normalized() {
        assert!((gaussian_kernel().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
