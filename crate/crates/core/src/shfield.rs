//! Degree-1 real spherical harmonics for the light sampling field.

use crate::assets::RadianceMap;
use crate::math::{Rgb, Vec3};
use crate::scalar::Scalar;

/// `√(1/4π)`
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
/// `√(3/4π)`
pub const SH_C1: f64 = 0.488_602_511_902_919_9;

/// Per channel (R, G, B) four coefficients in basis order `(Y₀⁰, Y₁⁻¹, Y₁⁰, Y₁¹)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShCoeffs12<T>(pub [T; 12]);

/// Hemispherical kernel used for the irradiance convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CosineKernel {
    /// `max(0, ω·n)`: `Â₀ = π`, `Â₁ = 2π/3`.
    #[default]
    Clamped,
    /// `|ω·n|` over the full sphere: `Â₀ = 2π`, `Â₁ = 0`.
    Absolute,
}

impl CosineKernel {
    pub fn bands<T: Scalar>(self) -> [T; 2] {
        let pi = std::f64::consts::PI;
        match self {
            CosineKernel::Clamped => [T::of(pi), T::of(2.0 * pi / 3.0)],
            CosineKernel::Absolute => [T::of(2.0 * pi), T::zero()],
        }
    }
}

/// Basis values at `dir`; non-unit input is renormalized.
#[inline]
pub fn sh_basis_l1<T: Scalar>(dir: Vec3<T>) -> [T; 4] {
    let len2 = dir.length_squared();
    let d = if (len2 - T::one()).abs() > T::of(1e-6) && len2 > T::zero() { dir.normalized() } else { dir };
    let c1 = T::of(SH_C1);
    [T::of(SH_C0), c1 * d.y, c1 * d.z, c1 * d.x]
}

impl<T: Scalar> ShCoeffs12<T> {
    pub fn zero() -> Self {
        Self([T::zero(); 12])
    }

    pub fn from_slice(s: &[T]) -> Self {
        let mut c = [T::zero(); 12];
        c.copy_from_slice(&s[..12]);
        Self(c)
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        &self.0[c * 4..c * 4 + 4]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Unclamped reconstruction per channel.
    pub fn eval_raw(&self, dir: Vec3<T>) -> Rgb<T> {
        let y = sh_basis_l1(dir);
        let ch = |c: usize| self.channel(c).iter().zip(&y).fold(T::zero(), |a, (ci, yi)| a + *ci * *yi);
        Rgb::new(ch(0), ch(1), ch(2))
    }

    /// Reconstructed radiance, negative lobes clamped to zero.
    pub fn eval_radiance(&self, dir: Vec3<T>) -> Rgb<T> {
        self.eval_raw(dir).map(|v| v.max(T::zero()))
    }

    /// Per-coefficient weights `Â_l · Y_l^m(n)` such that unclamped irradiance is `Σ w_i c_i`.
    #[inline]
    pub fn irradiance_weights(n: Vec3<T>, kernel: CosineKernel) -> [T; 4] {
        let y = sh_basis_l1(n);
        let [a0, a1] = kernel.bands::<T>();
        [a0 * y[0], a1 * y[1], a1 * y[2], a1 * y[3]]
    }

    /// Unclamped convolved irradiance.
    pub fn irradiance_raw(&self, n: Vec3<T>, kernel: CosineKernel) -> Rgb<T> {
        let w = Self::irradiance_weights(n, kernel);
        let ch = |c: usize| self.channel(c).iter().zip(&w).fold(T::zero(), |a, (ci, wi)| a + *ci * *wi);
        Rgb::new(ch(0), ch(1), ch(2))
    }

    /// Irradiance `E(n)`, clamped at zero.
    pub fn cosine_irradiance(&self, n: Vec3<T>, kernel: CosineKernel) -> Rgb<T> {
        self.irradiance_raw(n, kernel).map(|v| v.max(T::zero()))
    }

    /// Coefficients of the field rotated by `m` (row-major 3×3): degree-1 terms rotate as `(x, y, z)` vectors.
    pub fn rotated(&self, m: [[T; 3]; 3]) -> Self {
        let mut out = *self;
        for c in 0..3 {
            let base = c * 4;
            let v = [self.0[base + 3], self.0[base + 1], self.0[base + 2]];
            let r = |i: usize| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
            out.0[base + 3] = r(0);
            out.0[base + 1] = r(1);
            out.0[base + 2] = r(2);
        }
        out
    }

    pub fn scaled(&self, k: T) -> Self {
        Self(self.0.map(|v| v * k))
    }
}

impl ShCoeffs12<f64> {
    pub fn cast<T: Scalar>(&self) -> ShCoeffs12<T> {
        ShCoeffs12(self.0.map(T::of))
    }
}

/// `c_i = Σ_p L(p) Y_i(d_p) Δω_p` over all map pixels.
pub fn project_to_sh(map: &RadianceMap) -> ShCoeffs12<f64> {
    let mut sh = ShCoeffs12::zero();
    for r in 0..map.rows() {
        let dw = map.solid_angle(r);
        for c in 0..map.cols() {
            let l = map.pixel(r, c) * dw;
            let y = sh_basis_l1(map.direction(r, c));
            for (ch, v) in [l.r, l.g, l.b].into_iter().enumerate() {
                for i in 0..4 {
                    sh.0[ch * 4 + i] += v * y[i];
                }
            }
        }
    }
    sh
}

pub fn eval_radiance<T: Scalar>(sh: &ShCoeffs12<T>, dir: Vec3<T>) -> Rgb<T> {
    sh.eval_radiance(dir)
}

/// Clamped-cosine irradiance.
pub fn cosine_irradiance<T: Scalar>(sh: &ShCoeffs12<T>, n: Vec3<T>) -> Rgb<T> {
    sh.cosine_irradiance(n, CosineKernel::Clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn basis_constants() {
        let b = sh_basis_l1(Vec3::new(0.0f64, 0.0, 1.0));
        assert!((b[0] - 0.2820948).abs() < 1e-7 && b[1] == 0.0 && (b[2] - 0.4886025).abs() < 1e-7 && b[3] == 0.0);
        let b = sh_basis_l1(Vec3::new(0.0f64, 1.0, 0.0));
        assert!((b[1] - 0.4886025).abs() < 1e-7);
        assert!((SH_C0 - (1.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((SH_C1 - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn non_unit_input_is_renormalized() {
        let a = sh_basis_l1(Vec3::new(0.0f64, 2.0, 0.0));
        assert!((a[1] - SH_C1).abs() < 1e-12);
    }

    #[test]
    fn clamp_contract() {
        let mut sh = ShCoeffs12::<f64>::zero();
        assert_eq!(sh.eval_radiance(Vec3::new(0.0, 0.0, 1.0)), Rgb::zero());
        for c in 0..3 {
            sh.0[c * 4 + 2] = 1.0;
        }
        assert_eq!(sh.eval_radiance(Vec3::new(0.0, 0.0, -1.0)), Rgb::zero());
        assert!(sh.eval_radiance(Vec3::new(0.0, 0.0, 1.0)).r > 0.0);
    }

    #[test]
    fn constant_field_identities() {
        let map = RadianceMap::constant(90, 180, Rgb::splat(1.0));
        let sh = project_to_sh(&map);
        assert!((sh.0[0] - SH_C0 * 4.0 * PI).abs() < 1e-6);
        assert!(sh.0[1].abs() < 1e-9 && sh.0[2].abs() < 1e-9 && sh.0[3].abs() < 1e-9);
        let n = Vec3::new(0.3, -0.4, 0.5).normalized();
        assert!((sh.eval_radiance(n).g - 1.0).abs() < 1e-6);
        assert!((cosine_irradiance(&sh, n).b - PI).abs() < 1e-6);
        assert_eq!(cosine_irradiance(&ShCoeffs12::<f64>::zero(), n), Rgb::zero());
    }

    #[test]
    fn absolute_kernel_drops_directional_terms() {
        let mut sh = ShCoeffs12::<f64>::zero();
        sh.0[0] = 1.0;
        sh.0[2] = 5.0;
        let e = sh.cosine_irradiance(Vec3::new(0.0, 0.0, 1.0), CosineKernel::Absolute);
        assert!((e.r - 2.0 * PI * SH_C0).abs() < 1e-12);
    }

    #[test]
    fn rotation_equivariance() {
        let sh = ShCoeffs12([0.9, 0.2, -0.3, 0.4, 1.1, -0.5, 0.1, 0.2, 0.7, 0.3, 0.3, -0.1]);
        let (a, b) = (0.7f64, -1.2f64);
        let rz = [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
        let rx = [[1.0, 0.0, 0.0], [0.0, b.cos(), -b.sin()], [0.0, b.sin(), b.cos()]];
        let mul = |m: [[f64; 3]; 3], v: Vec3<f64>| {
            Vec3::new(
                m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
            )
        };
        let n = Vec3::new(0.2, 0.9, -0.3).normalized();
        for m in [rz, rx] {
            let lhs = sh.rotated(m).cosine_irradiance(mul(m, n), CosineKernel::Clamped);
            let rhs = sh.cosine_irradiance(n, CosineKernel::Clamped);
            assert!((lhs - rhs).to_array().iter().all(|d| d.abs() < 1e-9));
        }
    }

    #[test]
    fn projection_is_linear() {
        let m1 = RadianceMap::from_fn(20, 40, |d| Rgb::new(d.x.max(0.0), 1.0, d.y * d.y));
        let m2 = RadianceMap::from_fn(20, 40, |d| Rgb::new(0.5, d.z.abs(), 2.0));
        let mix = RadianceMap::from_fn(20, 40, |d| {
            Rgb::new(d.x.max(0.0), 1.0, d.y * d.y) * 2.0 + Rgb::new(0.5, d.z.abs(), 2.0) * 3.0
        });
        let (p1, p2, pm) = (project_to_sh(&m1), project_to_sh(&m2), project_to_sh(&mix));
        for i in 0..12 {
            assert!((pm.0[i] - (2.0 * p1.0[i] + 3.0 * p2.0[i])).abs() < 1e-4);
        }
    }
}
