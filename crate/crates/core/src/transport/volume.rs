//! Geometry-anchored Gaussian density and its ray quadrature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// `σ(x) = α_σ · exp(−|x − x₀|² / 2δ²)`; `delta` is in scene-normalized units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityParams {
    pub alpha_sigma: f64,
    pub delta: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self { alpha_sigma: 10.0, delta: 0.5 }
    }
}

impl DensityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_sigma > 0.0 && self.delta > 0.0) || !self.alpha_sigma.is_finite() || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "density parameters must be positive, got alpha_sigma={} delta={}",
                self.alpha_sigma, self.delta
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn density(x: Vec3<f64>, x0: Vec3<f64>, p: &DensityParams) -> f64 {
    let d2 = (x - x0).length_squared();
    p.alpha_sigma * (-d2 / (2.0 * p.delta * p.delta)).exp()
}

/// One quadrature point along a camera ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample {
    /// World-space ray parameter.
    pub t: f64,
    /// Distance to the intersection, normalized units.
    pub d_g: f64,
    pub sigma: f64,
    /// Segment length, normalized units.
    pub dt: f64,
    pub weight: f64,
}

/// Stratified samples over `[max(t₀ − 3δ, 0), t₀ + 3δ]`, weights filled in.
///
/// `scale` converts normalized units to world units. With `jitter` each
/// sample is placed uniformly inside its stratum instead of at the midpoint.
pub fn sample_along_ray<R: Rng>(
    t0: Option<f64>,
    count: usize,
    p: &DensityParams,
    scale: f64,
    jitter: Option<&mut R>,
) -> Vec<PathSample> {
    let Some(t0) = t0 else { return Vec::new() };
    if count == 0 {
        return Vec::new();
    }
    let half = 3.0 * p.delta * scale;
    let lo = (t0 - half).max(0.0);
    let hi = t0 + half;
    let step = (hi - lo) / count as f64;
    let offsets: Vec<f64> = match jitter {
        Some(rng) => (0..count).map(|_| rng.gen::<f64>()).collect(),
        None => vec![0.5; count],
    };
    let mut samples: Vec<PathSample> = offsets
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let t = lo + (i as f64 + u) * step;
            let d_g = (t - t0).abs() / scale;
            let sigma = p.alpha_sigma * (-d_g * d_g / (2.0 * p.delta * p.delta)).exp();
            PathSample { t, d_g, sigma, dt: step / scale, weight: 0.0 }
        })
        .collect();
    let sigmas: Vec<f64> = samples.iter().map(|s| s.sigma).collect();
    let dts: Vec<f64> = samples.iter().map(|s| s.dt).collect();
    for (s, w) in samples.iter_mut().zip(composite_weights(&sigmas, &dts)) {
        s.weight = w;
    }
    samples
}

/// `w_i = T_i (1 − e^{−σ_i δt_i})` with `T_i = exp(−Σ_{j<i} σ_j δt_j)`.
pub fn composite_weights(sigmas: &[f64], dts: &[f64]) -> Vec<f64> {
    assert_eq!(sigmas.len(), dts.len(), "sigma and segment arrays differ in length");
    let mut optical = 0.0f64;
    sigmas
        .iter()
        .zip(dts)
        .map(|(&s, &dt)| {
            let tau = s * dt;
            let w = (-optical).exp() * -(-tau).exp_m1();
            optical += tau;
            w
        })
        .collect()
}
