//! The three shading terms and their derivatives with respect to the
//! network outputs.

use std::f64::consts::FRAC_1_PI;

use crate::assets::{FaceAsset, Hit, TriangleMesh, RAY_EPSILON};
use crate::lighting::DirectLightSet;
use crate::math::{reflect, Ray, Rgb, Vec3};
use crate::neural::MaterialSample;
use crate::scalar::Scalar;
use crate::shfield::{CosineKernel, ShCoeffs12};

/// Visibility predicate: `true` when the given light direction is unblocked.
pub type Visibility<'a> = &'a (dyn Fn(Vec3<f64>) -> bool + Sync);

/// Inputs of the shading terms at one intersection.
#[derive(Clone, Copy)]
pub struct ShadingContext<'a, T> {
    pub n: Vec3<f64>,
    pub rho_s: Rgb<f64>,
    pub rho_ss: Rgb<f64>,
    pub material: MaterialSample<T>,
    pub sh: ShCoeffs12<T>,
    pub lights: &'a DirectLightSet,
    /// Unit vector toward the viewer.
    pub omega_o: Vec3<f64>,
    pub exponent: f64,
    pub kernel: CosineKernel,
    pub visibility: Option<Visibility<'a>>,
}

/// Light-set sums shared by every sample of a ray.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DirectIntegrals {
    /// `Σ V L max(0, ω_i·n) Δω`
    pub diffuse: Rgb<f64>,
    /// `Σ V L max(0, ω_o·R)^e Δω` over lights above the horizon.
    pub specular: Rgb<f64>,
}

pub fn gather_direct(
    lights: &DirectLightSet,
    n: Vec3<f64>,
    omega_o: Vec3<f64>,
    exponent: f64,
    visibility: Option<Visibility<'_>>,
) -> DirectIntegrals {
    let mut out = DirectIntegrals::default();
    for l in &lights.samples {
        let cos_i = l.direction.dot(n);
        if cos_i <= 0.0 {
            continue;
        }
        if let Some(v) = visibility {
            if !v(l.direction) {
                continue;
            }
        }
        let power = l.radiance * l.solid_angle;
        out.diffuse += power * cos_i;
        let lobe = omega_o.dot(reflect(l.direction, n));
        if lobe > 0.0 {
            out.specular += power * lobe.powf(exponent);
        }
    }
    out
}

pub fn shade_direct_specular<T: Scalar>(ctx: &ShadingContext<'_, T>) -> Rgb<T> {
    let d = gather_direct(ctx.lights, ctx.n, ctx.omega_o, ctx.exponent, ctx.visibility);
    d.specular.cast::<T>() * ctx.material.gamma
}

pub fn shade_direct_diffuse<T: Scalar>(ctx: &ShadingContext<'_, T>) -> Rgb<T> {
    let d = gather_direct(ctx.lights, ctx.n, ctx.omega_o, ctx.exponent, ctx.visibility);
    (ctx.rho_s * d.diffuse * FRAC_1_PI).cast()
}

pub fn shade_indirect_sss<T: Scalar>(ctx: &ShadingContext<'_, T>) -> Rgb<T> {
    let e = ctx.sh.cosine_irradiance(ctx.n.cast(), ctx.kernel);
    (ctx.rho_ss.cast::<T>() + ctx.material.eta) * e * T::of(FRAC_1_PI)
}

/// Binary shadow test from `x0`, offset along the geometric normal toward the light.
pub fn shadow_visibility(mesh: &TriangleMesh, x0: Vec3<f64>, geometric_normal: Vec3<f64>, light_dir: Vec3<f64>) -> bool {
    let side = if geometric_normal.dot(light_dir) >= 0.0 { 1.0 } else { -1.0 };
    let origin = x0 + geometric_normal * (side * RAY_EPSILON * (1.0 + x0.length()));
    !mesh.occluded(&Ray::new(origin, light_dir), f64::INFINITY)
}

/// Everything about a camera-ray hit that does not depend on the networks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub t0: f64,
    pub x0: Vec3<f64>,
    pub n: Vec3<f64>,
    pub albedo: Rgb<f64>,
    pub direct: DirectIntegrals,
}

impl SurfacePoint {
    pub fn from_hit(asset: &FaceAsset, ray: &Ray, hit: &Hit, lights: &DirectLightSet, exponent: f64, shadows: bool) -> Self {
        let n = asset.shading_normal(hit);
        let albedo = asset.albedo.sample(hit.uv);
        let omega_o = -ray.direction;
        let vis = |d: Vec3<f64>| shadow_visibility(&asset.mesh, hit.x0, hit.geometric_normal, d);
        let direct = gather_direct(lights, n, omega_o, exponent, if shadows { Some(&vis) } else { None });
        Self { t0: hit.t, x0: hit.x0, n, albedo, direct }
    }
}

/// Per-sample shading split into the three terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleTerms<T> {
    pub specular: Rgb<T>,
    pub diffuse: Rgb<T>,
    pub sss: Rgb<T>,
}

impl<T: Scalar> SampleTerms<T> {
    pub fn total(&self) -> Rgb<T> {
        self.specular + self.diffuse + self.sss
    }
}

/// `γ S + ρ/π D + (ρ + η)/π ⊙ E(sh, n)`.
#[inline]
pub fn sample_terms<T: Scalar>(sp: &SurfacePoint, m: &MaterialSample<T>, sh: &ShCoeffs12<T>, kernel: CosineKernel) -> SampleTerms<T> {
    let inv_pi = T::of(FRAC_1_PI);
    let e = sh.cosine_irradiance(sp.n.cast(), kernel);
    SampleTerms {
        specular: sp.direct.specular.cast::<T>() * m.gamma,
        diffuse: (sp.albedo * sp.direct.diffuse * FRAC_1_PI).cast(),
        sss: (sp.albedo.cast::<T>() + m.eta) * e * inv_pi,
    }
}

/// Gradient of `g · L` with respect to the network outputs at one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrads<T> {
    pub gamma: T,
    pub eta: Rgb<T>,
    pub sh: [T; 12],
}

#[inline]
pub fn sample_terms_backward<T: Scalar>(
    sp: &SurfacePoint,
    m: &MaterialSample<T>,
    sh: &ShCoeffs12<T>,
    kernel: CosineKernel,
    g: Rgb<T>,
) -> SampleGrads<T> {
    let inv_pi = T::of(FRAC_1_PI);
    let n: Vec3<T> = sp.n.cast();
    let raw = sh.irradiance_raw(n, kernel);
    let w = ShCoeffs12::<T>::irradiance_weights(n, kernel);
    let rho: Rgb<T> = sp.albedo.cast();
    let mut dsh = [T::zero(); 12];
    let mut deta = Rgb::zero();
    for c in 0..3 {
        let e = raw.channel(c);
        if e > T::zero() {
            let k = g.channel(c) * (rho.channel(c) + m.eta.channel(c)) * inv_pi;
            for i in 0..4 {
                dsh[c * 4 + i] = k * w[i];
            }
            let d = g.channel(c) * e * inv_pi;
            match c {
                0 => deta.r = d,
                1 => deta.g = d,
                _ => deta.b = d,
            }
        }
    }
    SampleGrads { gamma: g.dot(sp.direct.specular.cast()), eta: deta, sh: dsh }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn one_light(dir: Vec3<f64>, sa: f64) -> DirectLightSet {
        DirectLightSet::single(dir, Rgb::splat(1.0), sa)
    }

    fn ctx<'a>(lights: &'a DirectLightSet, n: Vec3<f64>, omega_o: Vec3<f64>, exponent: f64) -> ShadingContext<'a, f64> {
        ShadingContext {
            n,
            rho_s: Rgb::splat(1.0),
            rho_ss: Rgb::splat(0.5),
            material: MaterialSample { gamma: 1.0, eta: Rgb::splat(0.1) },
            sh: ShCoeffs12::zero(),
            lights,
            omega_o,
            exponent,
            kernel: CosineKernel::Clamped,
            visibility: None,
        }
    }

    #[test]
    fn mirror_aligned_specular() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let l = one_light(z, 1.0);
        for e in [1.0, 8.0, 128.0] {
            let s = shade_direct_specular(&ctx(&l, z, z, e));
            assert!((s.r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn specular_lobe_vanishes() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let l = one_light(z, 1.0);
        assert_eq!(shade_direct_specular(&ctx(&l, z, Vec3::new(1.0, 0.0, 0.0), 32.0)), Rgb::zero());
        let tilted = Vec3::new((1.0 - 0.81f64).sqrt(), 0.0, 0.9);
        assert!(shade_direct_specular(&ctx(&l, z, tilted, 2000.0)).r < 1e-80);
    }

    #[test]
    fn diffuse_cases() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let l = one_light(z, PI);
        assert!((shade_direct_diffuse(&ctx(&l, z, z, 32.0)).g - 1.0).abs() < 1e-12);
        let grazing = one_light(Vec3::new(1.0, 0.0, 0.0), PI);
        assert_eq!(shade_direct_diffuse(&ctx(&grazing, z, z, 32.0)), Rgb::zero());
        let below = one_light(Vec3::new(0.0, 0.6, -0.8), PI);
        assert_eq!(shade_direct_diffuse(&ctx(&below, z, z, 32.0)), Rgb::zero());
    }

    #[test]
    fn blocked_light_is_skipped() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let l = one_light(z, PI);
        let never = |_: Vec3<f64>| false;
        let c = ShadingContext { visibility: Some(&never), ..ctx(&l, z, z, 32.0) };
        assert_eq!(shade_direct_diffuse(&c), Rgb::zero());
        assert_eq!(shade_direct_specular(&c), Rgb::zero());
    }

    #[test]
    fn sss_constant_field() {
        let z = Vec3::new(0.0, 0.0, 1.0);
        let l = one_light(z, PI);
        let mut c = ctx(&l, Vec3::new(0.6, 0.0, 0.8), z, 32.0);
        c.sh.0[0] = 4.0 * PI * crate::shfield::SH_C0;
        c.sh.0[4] = c.sh.0[0];
        c.sh.0[8] = c.sh.0[0];
        let s = shade_indirect_sss(&c);
        assert!((s.r - 0.6).abs() < 1e-12 && (s.b - 0.6).abs() < 1e-12);
        c.sh = ShCoeffs12::zero();
        assert_eq!(shade_indirect_sss(&c), Rgb::zero());
    }

    #[test]
    fn diffuse_fades_continuously_at_horizon() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let mut last = f64::INFINITY;
        for k in 1..=6 {
            let eps = 10f64.powi(-k);
            let l = one_light(Vec3::new((1.0 - eps * eps).sqrt(), 0.0, eps), 1.0);
            let d = shade_direct_diffuse(&ctx(&l, n, n, 32.0)).r;
            assert!(d < last && d <= eps / PI + 1e-15);
            last = d;
        }
    }

    #[test]
    fn sample_terms_match_context_terms() {
        let lights = DirectLightSet {
            samples: crate::lighting::sphere_grid(40)
                .unwrap()
                .into_iter()
                .map(|d| crate::lighting::DirectionalLightSample { direction: d, radiance: Rgb::new(0.5, 1.0, 2.0), solid_angle: 0.3 })
                .collect(),
            source: "test".into(),
        };
        let n = Vec3::new(0.2, 0.9, 0.1).normalized();
        let omega_o = Vec3::new(-0.3, 0.5, 0.8).normalized();
        let mut c = ctx(&lights, n, omega_o, 16.0);
        c.rho_s = Rgb::new(0.7, 0.5, 0.3);
        c.rho_ss = c.rho_s;
        c.material = MaterialSample { gamma: 0.4, eta: Rgb::new(0.2, 0.3, 0.4) };
        c.sh = ShCoeffs12([1.0, 0.2, -0.1, 0.3, 0.5, 0.1, 0.1, -0.2, 0.8, -0.3, 0.2, 0.1]);
        let sp = SurfacePoint { t0: 1.0, x0: Vec3::zero(), n, albedo: c.rho_s, direct: gather_direct(&lights, n, omega_o, 16.0, None) };
        let t = sample_terms(&sp, &c.material, &c.sh, c.kernel);
        assert!((t.specular - shade_direct_specular(&c)).to_array().iter().all(|d| d.abs() < 1e-12));
        assert!((t.diffuse - shade_direct_diffuse(&c)).to_array().iter().all(|d| d.abs() < 1e-12));
        assert!((t.sss - shade_indirect_sss(&c)).to_array().iter().all(|d| d.abs() < 1e-12));
    }
}
