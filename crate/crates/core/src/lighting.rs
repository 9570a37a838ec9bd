//! Environment lighting: equirectangular mapping, the importance-sampled
//! directional light set, the pooled light code fed to the light field
//! network, and OLAT map generation.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::assets::{pixel_solid_angle, RadianceMap};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::math::{Rgb, Vec3};
use crate::shfield::{sh_basis_l1, ShCoeffs12};

/// Equirectangular `(u, v)` to direction; `v = 0` is +Y, `u = 0` is +X.
#[inline]
pub fn equirect_to_dir(u: f64, v: f64) -> Vec3<f64> {
    let theta = PI * v;
    let phi = 2.0 * PI * u;
    Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin())
}

/// Inverse of [`equirect_to_dir`], with `u` in `[0, 1)`.
#[inline]
pub fn dir_to_equirect(d: Vec3<f64>) -> (f64, f64) {
    let d = d.normalized();
    let v = d.y.clamp(-1.0, 1.0).acos() / PI;
    let mut u = d.z.atan2(d.x) / (2.0 * PI);
    if u < 0.0 {
        u += 1.0;
    }
    if u >= 1.0 {
        u -= 1.0;
    }
    (u, v)
}

/// Fibonacci lattice: `z_i = 1 − (2i+1)/N`, azimuth `i · golden angle`.
pub fn sphere_grid(n: usize) -> Result<Vec<Vec3<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sphere grid needs at least one point".into()));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect())
}

/// Index of the lattice point nearest to `dir`, exploiting that lattice `z` is monotone.
pub fn nearest_grid_point(grid: &[Vec3<f64>], dir: Vec3<f64>) -> usize {
    let n = grid.len();
    let guess = (((1.0 - dir.z) * n as f64 - 1.0) / 2.0).round().clamp(0.0, (n - 1) as f64) as usize;
    let mut best = guess;
    let mut best_d2 = (grid[guess] - dir).length_squared();
    // chord length bounds |Δz| from above, so stop once |Δz|² exceeds the best chord²
    for i in (0..guess).rev() {
        let dz = grid[i].z - dir.z;
        if dz * dz > best_d2 {
            break;
        }
        let d2 = (grid[i] - dir).length_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    for i in guess + 1..n {
        let dz = grid[i].z - dir.z;
        if dz * dz > best_d2 {
            break;
        }
        let d2 = (grid[i] - dir).length_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalLightSample {
    /// Unit vector toward the light.
    pub direction: Vec3<f64>,
    pub radiance: Rgb<f64>,
    /// Steradians.
    pub solid_angle: f64,
}

impl DirectionalLightSample {
    #[inline]
    pub fn power(&self) -> Rgb<f64> {
        self.radiance * self.solid_angle
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectLightSet {
    pub samples: Vec<DirectionalLightSample>,
    pub source: String,
}

impl DirectLightSet {
    pub fn single(direction: Vec3<f64>, radiance: Rgb<f64>, solid_angle: f64) -> Self {
        Self {
            samples: vec![DirectionalLightSample { direction: direction.normalized(), radiance, solid_angle }],
            source: "explicit".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_power(&self) -> Rgb<f64> {
        self.samples.iter().fold(Rgb::zero(), |acc, s| acc + s.power())
    }

    /// Every radiance multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.radiance = s.radiance * k;
        }
        out
    }

    /// One light per line: `dx dy dz r g b sr`.
    pub fn to_text(&self) -> String {
        let mut s = format!("# direct light set from {}\n", self.source);
        for l in &self.samples {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {}",
                l.direction.x, l.direction.y, l.direction.z, l.radiance.r, l.radiance.g, l.radiance.b, l.solid_angle
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { path: "<lights>".into(), line: i + 1, message: e.to_string() })?;
            if vals.len() != 7 {
                return Err(Error::Parse {
                    path: "<lights>".into(),
                    line: i + 1,
                    message: format!("expected 7 values, found {}", vals.len()),
                });
            }
            samples.push(DirectionalLightSample {
                direction: Vec3::new(vals[0], vals[1], vals[2]),
                radiance: Rgb::new(vals[3], vals[4], vals[5]),
                solid_angle: vals[6],
            });
        }
        Ok(Self { samples, source: "text".into() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Parameters of the direct light sampler.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightSampling {
    /// Size of the candidate lattice.
    pub n_lights: usize,
    /// Luminance percentile (over non-black candidates) at which candidates are clipped.
    pub clip_pct: f64,
    /// Candidates below this fraction of the mean importance are dropped.
    pub imp_thresh: f64,
    /// Plain lattice point sampling, no clipping or filtering.
    pub uniform_mode: bool,
}

impl Default for LightSampling {
    fn default() -> Self {
        Self { n_lights: 800, clip_pct: 99.5, imp_thresh: 0.05, uniform_mode: false }
    }
}

impl LightSampling {
    pub fn sample(&self, map: &RadianceMap) -> Result<DirectLightSet> {
        if self.uniform_mode {
            uniform_sample_lights(map, self.n_lights)
        } else {
            importance_sample_lights(map, self.n_lights, self.clip_pct, self.imp_thresh)
        }
    }
}

/// Lattice point sampling: bilinear radiance at each of `n` lattice points.
pub fn uniform_sample_lights(map: &RadianceMap, n: usize) -> Result<DirectLightSet> {
    let grid = sphere_grid(n)?;
    let sa = 4.0 * PI / n as f64;
    Ok(DirectLightSet {
        samples: grid
            .into_iter()
            .map(|d| DirectionalLightSample { direction: d, radiance: map.lookup(d), solid_angle: sa })
            .collect(),
        source: "uniform".into(),
    })
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Power of each lattice cell: every map pixel is split into sub-pixels that
/// are assigned to their nearest lattice point.
fn bin_to_cells(map: &RadianceMap, grid: &[Vec3<f64>]) -> Vec<Rgb<f64>> {
    let rows = map.rows();
    let cols = map.cols();
    let cell = 4.0 * PI / grid.len() as f64;
    let widest = pixel_solid_angle(rows, cols, rows / 2);
    let split = ((64.0 * widest / cell).sqrt().ceil() as usize).clamp(1, 16);
    let mut binned = vec![Rgb::<f64>::zero(); grid.len()];
    for r in 0..rows {
        for sr in 0..split {
            let v0 = (r as f64 + sr as f64 / split as f64) / rows as f64;
            let v1 = (r as f64 + (sr + 1) as f64 / split as f64) / rows as f64;
            let dw = (2.0 * PI / (cols * split) as f64) * ((PI * v0).cos() - (PI * v1).cos());
            let vm = 0.5 * (v0 + v1);
            for c in 0..cols {
                let px = map.pixel(r, c);
                if px.luminance() <= 0.0 {
                    continue;
                }
                for sc in 0..split {
                    let u = (c as f64 + (sc as f64 + 0.5) / split as f64) / cols as f64;
                    let k = nearest_grid_point(grid, equirect_to_dir(u, vm));
                    binned[k] += px * dw;
                }
            }
        }
    }
    binned
}

/// Importance light sampling over an `n`-point lattice.
///
/// Map power is binned into the nearest lattice point, so every candidate
/// carries the mean radiance of its cell. Candidate luminance is clipped at
/// the `clip_pct` percentile of non-black candidate luminances;
/// candidates whose importance (local contrast plus luminance) is below
/// `imp_thresh` × the mean importance are dropped, keeping at least
/// `max(32, n/16)` of the brightest non-black ones. Survivor radiance is then
/// rescaled per channel so the set carries the full candidate power.
pub fn importance_sample_lights(map: &RadianceMap, n: usize, clip_pct: f64, imp_thresh: f64) -> Result<DirectLightSet> {
    if !(0.0..=100.0).contains(&clip_pct) || clip_pct.is_nan() {
        return Err(Error::InvalidArgument(format!("clip percentile {clip_pct} outside [0, 100]")));
    }
    if imp_thresh.is_nan() || imp_thresh < 0.0 {
        return Err(Error::InvalidArgument(format!("importance threshold {imp_thresh} must be >= 0")));
    }
    let grid = sphere_grid(n)?;
    let cell = 4.0 * PI / n as f64;
    let rows = map.rows();
    let cols = map.cols();

    let binned = bin_to_cells(map, &grid);
    let mut lums: Vec<f64> = binned.iter().map(|p| p.luminance()).filter(|l| *l > 0.0).collect();
    if lums.is_empty() {
        return Ok(DirectLightSet {
            samples: vec![DirectionalLightSample { direction: Vec3::new(0.0, 1.0, 0.0), radiance: Rgb::zero(), solid_angle: cell }],
            source: "importance (black map)".into(),
        });
    }
    lums.sort_by(f64::total_cmp);
    let clip = percentile(&lums, clip_pct) / cell;

    let radiance: Vec<Rgb<f64>> = binned
        .iter()
        .map(|p| {
            let rad = *p * (1.0 / cell);
            let lum = rad.luminance();
            if lum > clip {
                rad * (clip / lum)
            } else {
                rad
            }
        })
        .collect();

    // local contrast on the clipped luminance image
    let clipped_lum = |r: usize, c: usize| map.pixel(r, c).luminance().min(clip);
    let importance: Vec<f64> = grid
        .iter()
        .zip(&radiance)
        .map(|(d, rad)| {
            let (u, v) = dir_to_equirect(*d);
            let r = ((v * rows as f64) as usize).min(rows - 1);
            let c = ((u * cols as f64) as usize).min(cols - 1);
            let mut sum = 0.0;
            let mut count = 0.0;
            for dr in -1i64..=1 {
                let rr = r as i64 + dr;
                if rr < 0 || rr >= rows as i64 {
                    continue;
                }
                for dc in -1i64..=1 {
                    let cc = (c as i64 + dc).rem_euclid(cols as i64) as usize;
                    sum += clipped_lum(rr as usize, cc);
                    count += 1.0;
                }
            }
            let lum = rad.luminance();
            (clipped_lum(r, c) - sum / count).abs() + lum
        })
        .collect();
    let mean_importance = importance.iter().sum::<f64>() / n as f64;

    let mut keep: Vec<bool> = importance
        .iter()
        .zip(&radiance)
        .map(|(imp, rad)| *imp >= imp_thresh * mean_importance && rad.luminance() > 0.0)
        .collect();
    let floor = 32.max(n / 16).min(n);
    let kept = keep.iter().filter(|k| **k).count();
    if kept < floor {
        let mut order: Vec<usize> = (0..n).filter(|&i| !keep[i] && radiance[i].luminance() > 0.0).collect();
        order.sort_by(|&a, &b| radiance[b].luminance().total_cmp(&radiance[a].luminance()).then(a.cmp(&b)));
        for i in order.into_iter().take(floor - kept) {
            keep[i] = true;
        }
    }

    let candidate_power = radiance.iter().fold(Rgb::zero(), |acc, r| acc + *r * cell);
    let retained_power = radiance
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .fold(Rgb::zero(), |acc, (r, _)| acc + *r * cell);
    let ratio = |c: usize| {
        let retained = retained_power.channel(c);
        if retained > 0.0 {
            candidate_power.channel(c) / retained
        } else {
            1.0
        }
    };
    let scale = Rgb::new(ratio(0), ratio(1), ratio(2));

    let samples: Vec<DirectionalLightSample> = grid
        .iter()
        .zip(&radiance)
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|((d, r), _)| DirectionalLightSample { direction: *d, radiance: *r * scale, solid_angle: cell })
        .collect();
    Ok(DirectLightSet { samples, source: "importance".into() })
}

/// Box-filtered resize; each output pixel is the solid-angle-weighted mean of its footprint.
pub fn downsample_hdri(map: &RadianceMap, rows: usize, cols: usize) -> Result<RadianceMap> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("downsample target has a zero dimension".into()));
    }
    let (sr, sc) = (map.rows(), map.cols());
    if rows > sr || cols > sc {
        return Err(Error::InvalidArgument(format!("cannot downsample {sr}x{sc} to larger {rows}x{cols}")));
    }
    if rows == sr && cols == sc {
        return Ok(map.clone());
    }
    // overlap of source row band `r` with target row band `t`, as a cosine difference
    let row_weight = |t: usize, r: usize| -> f64 {
        let a0 = PI * t as f64 / rows as f64;
        let a1 = PI * (t + 1) as f64 / rows as f64;
        let b0 = PI * r as f64 / sr as f64;
        let b1 = PI * (r + 1) as f64 / sr as f64;
        let lo = a0.max(b0);
        let hi = a1.min(b1);
        if hi > lo {
            lo.cos() - hi.cos()
        } else {
            0.0
        }
    };
    let col_weight = |t: usize, c: usize| -> f64 {
        let a0 = t as f64 / cols as f64;
        let a1 = (t + 1) as f64 / cols as f64;
        let b0 = c as f64 / sc as f64;
        let b1 = (c + 1) as f64 / sc as f64;
        (a1.min(b1) - a0.max(b0)).max(0.0)
    };
    let image = RgbImage::from_fn(cols, rows, |tc, tr| {
        let r_lo = tr * sr / rows;
        let r_hi = ((tr + 1) * sr).div_ceil(rows).min(sr);
        let c_lo = tc * sc / cols;
        let c_hi = ((tc + 1) * sc).div_ceil(cols).min(sc);
        let mut acc = Rgb::zero();
        let mut wsum = 0.0;
        for r in r_lo..r_hi {
            let wr = row_weight(tr, r);
            if wr <= 0.0 {
                continue;
            }
            for c in c_lo..c_hi {
                let w = wr * col_weight(tc, c);
                if w > 0.0 {
                    acc += map.pixel(r, c) * w;
                    wsum += w;
                }
            }
        }
        let v = if wsum > 0.0 { acc * (1.0 / wsum) } else { Rgb::zero() };
        Rgb::new(v.r as f32, v.g as f32, v.b as f32)
    });
    Ok(RadianceMap::new(image))
}

/// Per-pixel `(direction, radiance)` features of a (downsampled) environment.
#[derive(Clone, Debug, PartialEq)]
pub struct LightEmbedding {
    pub rows: usize,
    pub cols: usize,
    pub features: Vec<[f64; 6]>,
}

impl LightEmbedding {
    pub fn pixel_count(&self) -> usize {
        self.features.len()
    }
}

pub const LIGHT_CODE_DIM: usize = 18;

pub fn build_light_embedding(map: &RadianceMap) -> LightEmbedding {
    let mut features = Vec::with_capacity(map.rows() * map.cols());
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            let d = map.direction(r, c);
            let l = map.pixel(r, c);
            features.push([d.x, d.y, d.z, l.r, l.g, l.b]);
        }
    }
    LightEmbedding { rows: map.rows(), cols: map.cols(), features }
}

fn pooled_code<'a>(items: impl Iterator<Item = (Vec3<f64>, Rgb<f64>)> + Clone + 'a, dim: usize) -> Vec<f64> {
    let mut weighted_dir = Vec3::zero();
    let mut weight = 0.0;
    let mut power = Rgb::zero();
    let mut sh = ShCoeffs12::<f64>::zero();
    for (d, p) in items {
        let lum = p.luminance();
        weighted_dir += d * lum;
        weight += lum;
        power += p;
        let y = sh_basis_l1(d);
        for (c, ch) in [p.r, p.g, p.b].into_iter().enumerate() {
            for (i, yi) in y.iter().enumerate() {
                sh.0[c * 4 + i] += ch * yi;
            }
        }
    }
    let mean_dir = if weight > 0.0 { weighted_dir * (1.0 / weight) } else { Vec3::zero() };
    let mut code: Vec<f64> = Vec::with_capacity(LIGHT_CODE_DIM);
    code.extend_from_slice(&mean_dir.to_array());
    code.extend_from_slice(&power.to_array());
    code.extend_from_slice(&sh.0);
    code.resize(dim, 0.0);
    code
}

/// Fixed-size code: luminance-weighted mean direction (3), total RGB power (3)
/// and the degree-1 SH projection (12); zero-padded or truncated to `dim`.
pub fn pool_light_embedding(emb: &LightEmbedding, dim: usize) -> Vec<f64> {
    let rows = emb.rows;
    let cols = emb.cols;
    pooled_code(
        emb.features.iter().enumerate().map(move |(i, f)| {
            let dw = pixel_solid_angle(rows, cols, i / cols);
            (Vec3::new(f[0], f[1], f[2]), Rgb::new(f[3], f[4], f[5]) * dw)
        }),
        dim,
    )
}

/// Same pooled code computed from a direct light set instead of the map.
pub fn pool_light_set(set: &DirectLightSet, dim: usize) -> Vec<f64> {
    pooled_code(set.samples.iter().map(|s| (s.direction, s.power())), dim)
}

/// What the light field network is conditioned on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LightCodeSource {
    /// Pooled embedding of the environment downsampled to 100×150.
    #[default]
    DownsampledMap,
    /// Pooled direct light set.
    DirectSet,
}

pub const EMBEDDING_ROWS: usize = 100;
pub const EMBEDDING_COLS: usize = 150;

/// Light code for a map, downsampling when the source is larger than 100×150.
pub fn light_code(map: &RadianceMap, set: &DirectLightSet, source: LightCodeSource, dim: usize) -> Result<Vec<f64>> {
    match source {
        LightCodeSource::DirectSet => Ok(pool_light_set(set, dim)),
        LightCodeSource::DownsampledMap => {
            let small = downsample_hdri(map, EMBEDDING_ROWS.min(map.rows()), EMBEDDING_COLS.min(map.cols()))?;
            Ok(pool_light_embedding(&build_light_embedding(&small), dim))
        }
    }
}

/// One-light-at-a-time environment: a spherical cap light.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OlatSpec {
    pub center: Vec3<f64>,
    /// Radians in `(0, π]`.
    pub angular_radius: f64,
    pub radiance: Rgb<f64>,
}

pub fn generate_olat(spec: &OlatSpec, rows: usize, cols: usize) -> Result<RadianceMap> {
    if !(spec.angular_radius > 0.0 && spec.angular_radius <= PI) {
        return Err(Error::InvalidArgument(format!("OLAT radius {} outside (0, π]", spec.angular_radius)));
    }
    if spec.radiance.r < 0.0 || spec.radiance.g < 0.0 || spec.radiance.b < 0.0 {
        return Err(Error::InvalidArgument("OLAT radiance must be non-negative".into()));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("OLAT map needs positive dimensions".into()));
    }
    let center = spec.center.normalized();
    let cos_r = spec.angular_radius.cos();
    let inside = spec.radiance;
    Ok(RadianceMap::from_fn(rows, cols, move |d| {
        if spec.angular_radius >= PI || d.dot(center) >= cos_r {
            inside
        } else {
            Rgb::zero()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3<f64>, b: Vec3<f64>, tol: f64) -> bool {
        (a - b).length() < tol
    }

    #[test]
    fn equirect_reference_directions() {
        assert!(close(equirect_to_dir(0.37, 0.0), Vec3::new(0.0, 1.0, 0.0), 1e-12));
        assert!(close(equirect_to_dir(0.0, 0.5), Vec3::new(1.0, 0.0, 0.0), 1e-12));
        assert!(close(equirect_to_dir(0.25, 0.5), Vec3::new(0.0, 0.0, 1.0), 1e-12));
    }

    #[test]
    fn equirect_round_trip() {
        for i in 0..50 {
            for j in 0..50 {
                let u = i as f64 / 50.0;
                let v = 0.01 + 0.98 * j as f64 / 49.0;
                let (u2, v2) = dir_to_equirect(equirect_to_dir(u, v));
                assert!((u - u2).abs() < 1e-6 && (v - v2).abs() < 1e-6, "({u},{v}) -> ({u2},{v2})");
            }
        }
    }

    #[test]
    fn small_lattices() {
        assert_eq!(sphere_grid(1).unwrap()[0].z, 0.0);
        let g = sphere_grid(2).unwrap();
        assert_eq!(g[0].z, 0.5);
        assert_eq!(g[1].z, -0.5);
        assert!(sphere_grid(0).is_err());
    }

    #[test]
    fn lattice_spacing_for_800_points() {
        let g = sphere_grid(800).unwrap();
        let mut min_nn = f64::INFINITY;
        let mut max_nn: f64 = 0.0;
        for (i, a) in g.iter().enumerate() {
            let nn = g
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.dot(*b).clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min);
            min_nn = min_nn.min(nn);
            max_nn = max_nn.max(nn);
        }
        assert!(min_nn.to_degrees() > 3.0, "min {}", min_nn.to_degrees());
        assert!(max_nn.to_degrees() < 9.0, "max {}", max_nn.to_degrees());
    }

    #[test]
    fn nearest_grid_point_matches_brute_force() {
        let g = sphere_grid(800).unwrap();
        for r in 0..40 {
            for c in 0..80 {
                let d = equirect_to_dir((c as f64 + 0.3) / 80.0, (r as f64 + 0.6) / 40.0);
                let brute = (0..g.len())
                    .min_by(|&a, &b| (g[a] - d).length_squared().total_cmp(&(g[b] - d).length_squared()))
                    .unwrap();
                let fast = nearest_grid_point(&g, d);
                assert!(((g[fast] - d).length_squared() - (g[brute] - d).length_squared()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_map_energy() {
        let map = RadianceMap::constant(64, 128, Rgb::splat(0.7));
        let set = importance_sample_lights(&map, 800, 99.5, 0.05).unwrap();
        let p = set.total_power();
        let want = 4.0 * PI * 0.7;
        assert!(((p.r - want) / want).abs() < 0.01);
        assert_eq!(set.len(), 800);
    }

    #[test]
    fn all_black_map_yields_sentinel() {
        let map = RadianceMap::constant(8, 16, Rgb::zero());
        let set = importance_sample_lights(&map, 800, 99.5, 0.05).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.samples[0].radiance, Rgb::zero());
    }

    #[test]
    fn outlier_is_clipped_to_percentile() {
        let rows = 64;
        let cols = 128;
        let grid = sphere_grid(800).unwrap();
        let target = grid[200];
        let (u, v) = dir_to_equirect(target);
        let (tr, tc) = ((v * rows as f64) as usize, (u * cols as f64) as usize);
        let base = RadianceMap::from_fn(rows, cols, |d| Rgb::splat(1.0 + 0.2 * d.x));
        let mut img = base.image.clone();
        img.set(tc, tr, Rgb::splat(1.0e6));
        let map = RadianceMap::new(img);
        let set = importance_sample_lights(&map, 800, 99.5, 0.05).unwrap();
        let s = set.samples.iter().find(|s| close(s.direction, target, 1e-12)).unwrap();
        // top of the smooth map is 1.2; the clipped outlier lands at the upper percentile of that range
        assert!((s.radiance.luminance() - 1.2).abs() / 1.2 < 0.05, "lum {}", s.radiance.luminance());
        let max_other = set
            .samples
            .iter()
            .filter(|o| !close(o.direction, target, 1e-12))
            .map(|o| o.radiance.luminance())
            .fold(0.0, f64::max);
        assert!(s.radiance.luminance() <= max_other * 1.0001);
    }

    #[test]
    fn downsample_preserves_constant_and_power() {
        let map = RadianceMap::constant(200, 300, Rgb::splat(2.5));
        let small = downsample_hdri(&map, 100, 150).unwrap();
        assert!(small.image.data.iter().all(|p| (p.r - 2.5).abs() < 1e-5));

        let tiny = RadianceMap::new(RgbImage::from_fn(2, 2, |_, y| Rgb::splat(4.0 * y as f32)));
        let one = downsample_hdri(&tiny, 1, 1).unwrap();
        assert!((one.pixel(0, 0).r - 2.0).abs() < 1e-6);

        assert_eq!(downsample_hdri(&tiny, 2, 2).unwrap(), tiny);
        assert!(downsample_hdri(&tiny, 0, 1).is_err());
    }

    #[test]
    fn downsample_uneven_ratio_keeps_power() {
        let map = RadianceMap::from_fn(37, 71, |d| Rgb::new(1.0 + d.x, 2.0 + d.y * d.z, 0.5 + d.y.abs()));
        let small = downsample_hdri(&map, 10, 23).unwrap();
        let (a, b) = (map.total_power(), small.total_power());
        for c in 0..3 {
            assert!(((a.channel(c) - b.channel(c)) / a.channel(c)).abs() < 1e-5);
        }
    }

    #[test]
    fn embedding_shape_and_pooling() {
        let map = RadianceMap::constant(100, 150, Rgb::splat(1.0));
        let emb = build_light_embedding(&map);
        assert_eq!(emb.pixel_count(), 15000);
        let code = pool_light_embedding(&emb, LIGHT_CODE_DIM);
        assert_eq!(code.len(), 18);
        assert!(Vec3::new(code[0], code[1], code[2]).length() < 1e-9);
        assert!((code[3] - 4.0 * PI).abs() < 1e-9);

        let polar = RadianceMap::from_fn(100, 150, |d| if d.y > 0.95 { Rgb::splat(1.0) } else { Rgb::zero() });
        let code = pool_light_embedding(&build_light_embedding(&polar), 18);
        assert!(close(Vec3::new(code[0], code[1], code[2]), Vec3::new(0.0, 1.0, 0.0), 0.03));
        assert_eq!(pool_light_embedding(&emb, 4).len(), 4);
        assert_eq!(pool_light_embedding(&emb, 20)[18..], [0.0, 0.0]);
    }

    #[test]
    fn olat_cap_geometry() {
        let spec = OlatSpec { center: Vec3::new(0.0, 1.0, 0.0), angular_radius: 10f64.to_radians(), radiance: Rgb::splat(5.0) };
        let map = generate_olat(&spec, 100, 150).unwrap();
        for r in 0..100 {
            for c in 0..150 {
                let lit = map.pixel(r, c).r > 0.0;
                assert_eq!(lit, map.direction(r, c).y >= 10f64.to_radians().cos());
                if lit {
                    assert!(r < 6);
                }
            }
        }
        let full = generate_olat(&OlatSpec { angular_radius: PI, ..spec }, 10, 20).unwrap();
        assert!(full.image.data.iter().all(|p| p.r == 5.0));
    }

    #[test]
    fn olat_power_matches_cap_solid_angle() {
        let r = 30f64.to_radians();
        let spec = OlatSpec { center: Vec3::new(0.3, 0.5, -0.8), angular_radius: r, radiance: Rgb::splat(1.0) };
        let map = generate_olat(&spec, 200, 400).unwrap();
        let want = 2.0 * PI * (1.0 - r.cos());
        assert!(((map.total_power().r - want) / want).abs() < 0.02);
        let mut values: Vec<u32> = map.image.data.iter().map(|p| p.r.to_bits()).collect();
        values.sort();
        values.dedup();
        assert_eq!(values.len(), 2);
    }

    #[test]
    fn light_set_text_round_trip() {
        let set = importance_sample_lights(&RadianceMap::constant(16, 32, Rgb::new(0.1, 0.2, 0.3)), 64, 99.5, 0.05).unwrap();
        let back = DirectLightSet::from_text(&set.to_text()).unwrap();
        assert_eq!(back.samples, set.samples);
    }
}
