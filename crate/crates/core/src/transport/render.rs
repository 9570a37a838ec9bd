//! Ray quadrature composed with the shading terms, and tiled image rendering.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::camera::Camera;
use super::shading::{sample_terms, SurfacePoint};
use super::volume::{sample_along_ray, DensityParams, PathSample};
use crate::assets::{FaceAsset, RadianceMap};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::lighting::{light_code, DirectLightSet, LightCodeSource, LightSampling};
use crate::math::{Ray, Rgb, Vec3};
use crate::neural::{MaterialSample, Networks, SceneBox};
use crate::scalar::Scalar;
use crate::shfield::{CosineKernel, ShCoeffs12};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    pub density: DensityParams,
    pub samples_per_ray: usize,
    pub specular_exponent: f64,
    pub shadows: bool,
    pub kernel: CosineKernel,
    /// Seed for stratum jitter; `None` places samples at stratum midpoints.
    pub jitter_seed: Option<u64>,
    pub tile_size: usize,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            density: DensityParams::default(),
            samples_per_ray: 64,
            specular_exponent: 32.0,
            shadows: true,
            kernel: CosineKernel::Clamped,
            jitter_seed: None,
            tile_size: 16,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        if self.samples_per_ray == 0 || self.tile_size == 0 {
            return Err(Error::InvalidArgument("samples_per_ray and tile_size must be positive".into()));
        }
        if !(self.specular_exponent >= 0.0) {
            return Err(Error::InvalidArgument(format!("specular exponent {} must be >= 0", self.specular_exponent)));
        }
        Ok(())
    }
}

/// An HDRI with its direct light set and pooled light code.
#[derive(Clone, Debug)]
pub struct Environment {
    pub map: RadianceMap,
    pub lights: DirectLightSet,
    pub code: Vec<f64>,
}

impl Environment {
    pub fn new(map: RadianceMap, sampling: &LightSampling, code_source: LightCodeSource, code_dim: usize) -> Result<Self> {
        let lights = sampling.sample(&map)?;
        let code = light_code(&map, &lights, code_source, code_dim)?;
        Ok(Self { map, lights, code })
    }

    /// Uses an explicit light set instead of sampling the map.
    pub fn with_lights(map: RadianceMap, lights: DirectLightSet, code_source: LightCodeSource, code_dim: usize) -> Result<Self> {
        let code = light_code(&map, &lights, code_source, code_dim)?;
        Ok(Self { map, lights, code })
    }
}

/// Source of the per-sample material and SH coefficients.
pub trait ShadingFields<T: Scalar>: Sync {
    fn scene_box(&self) -> SceneBox;

    /// Evaluates both fields for every sample. `xn` are normalized positions.
    fn query(
        &self,
        xn: &[Vec3<T>],
        omega_o: &[Vec3<T>],
        code: &[T],
        materials: &mut Vec<MaterialSample<T>>,
        sh: &mut Vec<ShCoeffs12<T>>,
    ) -> Result<()>;
}

impl<T: Scalar> ShadingFields<T> for Networks<T> {
    fn scene_box(&self) -> SceneBox {
        self.scene_box
    }

    fn query(
        &self,
        xn: &[Vec3<T>],
        omega_o: &[Vec3<T>],
        code: &[T],
        materials: &mut Vec<MaterialSample<T>>,
        sh: &mut Vec<ShCoeffs12<T>>,
    ) -> Result<()> {
        let n = xn.len();
        materials.clear();
        sh.clear();
        if n == 0 {
            return Ok(());
        }
        let (mut mb, mut mi) = (Vec::new(), Vec::new());
        let (mut lb, mut li) = (Vec::new(), Vec::new());
        for (x, w) in xn.iter().zip(omega_o) {
            self.material.push_inputs(*x, *w, &mut mb, &mut mi);
            self.light_field.push_inputs(*x, *w, code, &mut lb, &mut li);
        }
        let m = self.material.mlp.infer(&mb, &mi, n)?;
        let l = self.light_field.mlp.infer(&lb, &li, n)?;
        materials.extend(m.chunks_exact(4).map(MaterialSample::from_row));
        sh.extend(l.chunks_exact(12).map(ShCoeffs12::from_slice));
        Ok(())
    }
}

/// Spatially constant material and SH field, bypassing the networks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedFields<T> {
    pub material: MaterialSample<T>,
    pub sh: ShCoeffs12<T>,
    pub scene_box: SceneBox,
}

impl<T: Scalar> FixedFields<T> {
    pub fn new(gamma: T, eta: Rgb<T>) -> Self {
        Self { material: MaterialSample { gamma, eta }, sh: ShCoeffs12::zero(), scene_box: SceneBox::unit() }
    }
}

impl<T: Scalar> ShadingFields<T> for FixedFields<T> {
    fn scene_box(&self) -> SceneBox {
        self.scene_box
    }

    fn query(
        &self,
        xn: &[Vec3<T>],
        _omega_o: &[Vec3<T>],
        _code: &[T],
        materials: &mut Vec<MaterialSample<T>>,
        sh: &mut Vec<ShCoeffs12<T>>,
    ) -> Result<()> {
        materials.clear();
        sh.clear();
        materials.resize(xn.len(), self.material);
        sh.resize(xn.len(), self.sh);
        Ok(())
    }
}

/// Fixed fields whose material varies as a checker of sinusoids over normalized `x, y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternFields<T> {
    pub base: FixedFields<T>,
    /// Relative modulation depth in `[0, 1]`.
    pub amplitude: T,
    /// Cycles per unit of normalized coordinate.
    pub frequency: T,
}

impl<T: Scalar> PatternFields<T> {
    /// Skin-like defaults lit by a constant SH field.
    pub fn standard(sh: ShCoeffs12<T>, scene_box: SceneBox) -> Self {
        let c = T::of;
        let mut base = FixedFields::new(c(0.3), Rgb::splat(c(0.6)));
        base.sh = sh;
        base.scene_box = scene_box;
        Self { base, amplitude: c(0.9), frequency: c(3.0) }
    }

    pub fn modulation(&self, xn: Vec3<T>) -> T {
        let w = T::of(std::f64::consts::TAU) * self.frequency;
        T::one() + self.amplitude * (w * xn.x).sin() * (w * xn.y).sin()
    }
}

impl<T: Scalar> ShadingFields<T> for PatternFields<T> {
    fn scene_box(&self) -> SceneBox {
        self.base.scene_box
    }

    fn query(
        &self,
        xn: &[Vec3<T>],
        omega_o: &[Vec3<T>],
        code: &[T],
        materials: &mut Vec<MaterialSample<T>>,
        sh: &mut Vec<ShCoeffs12<T>>,
    ) -> Result<()> {
        self.base.query(xn, omega_o, code, materials, sh)?;
        for (m, x) in materials.iter_mut().zip(xn) {
            let k = self.modulation(*x);
            m.gamma = m.gamma * k;
            m.eta = m.eta * k;
        }
        Ok(())
    }
}

/// A pixel split into the three shading terms plus what shows through.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PixelLayers<T> {
    pub specular: Rgb<T>,
    pub diffuse: Rgb<T>,
    pub sss: Rgb<T>,
    /// `(1 − Σw) · background`
    pub background: Rgb<T>,
}

impl<T: Scalar> PixelLayers<T> {
    pub fn total(&self) -> Rgb<T> {
        self.specular + self.diffuse + self.sss + self.background
    }
}

/// Network-independent part of a camera ray.
#[derive(Clone, Debug, PartialEq)]
pub struct RayPlan {
    pub ray: Ray,
    pub background: Rgb<f64>,
    pub surface: Option<SurfacePoint>,
    pub samples: Vec<PathSample>,
}

impl RayPlan {
    pub fn weight_sum(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    /// Normalized sample positions.
    pub fn sample_positions(&self, scene_box: &SceneBox) -> impl Iterator<Item = Vec3<f64>> + '_ {
        let sb = *scene_box;
        self.samples.iter().map(move |s| sb.normalize(self.ray.at(s.t)))
    }
}

/// Intersection, direct light gathering and sample placement for one ray.
pub fn plan_ray(
    ray: &Ray,
    asset: &FaceAsset,
    env: &Environment,
    scene_box: &SceneBox,
    settings: &RenderSettings,
    jitter: Option<&mut ChaCha8Rng>,
) -> RayPlan {
    let background = env.map.lookup(ray.direction);
    match asset.mesh.intersect(ray) {
        None => RayPlan { ray: *ray, background, surface: None, samples: Vec::new() },
        Some(hit) => {
            let sp = SurfacePoint::from_hit(asset, ray, &hit, &env.lights, settings.specular_exponent, settings.shadows);
            let samples = sample_along_ray(Some(hit.t), settings.samples_per_ray, &settings.density, scene_box.half_extent, jitter);
            RayPlan { ray: *ray, background, surface: Some(sp), samples }
        }
    }
}

/// Composites planned rays given per-sample field values laid out ray after ray.
pub fn composite<T: Scalar>(
    plans: &[RayPlan],
    materials: &[MaterialSample<T>],
    sh: &[ShCoeffs12<T>],
    kernel: CosineKernel,
) -> Vec<PixelLayers<T>> {
    let mut k = 0;
    plans
        .iter()
        .map(|p| {
            let bg: Rgb<T> = p.background.cast();
            let Some(sp) = &p.surface else {
                return PixelLayers { background: bg, ..Default::default() };
            };
            let mut out = PixelLayers::<T>::default();
            let mut wsum = 0.0;
            for s in &p.samples {
                let t = sample_terms(sp, &materials[k], &sh[k], kernel);
                let w = T::of(s.weight);
                out.specular += t.specular * w;
                out.diffuse += t.diffuse * w;
                out.sss += t.sss * w;
                wsum += s.weight;
                k += 1;
            }
            out.background = bg * T::of(1.0 - wsum);
            out
        })
        .collect()
}

fn shade_plans<T: Scalar, F: ShadingFields<T> + ?Sized>(
    plans: &[RayPlan],
    fields: &F,
    code: &[T],
    kernel: CosineKernel,
) -> Result<Vec<PixelLayers<T>>> {
    let sb = fields.scene_box();
    let mut xn = Vec::new();
    let mut dirs = Vec::new();
    for p in plans {
        let w: Vec3<T> = (-p.ray.direction).cast();
        for x in p.sample_positions(&sb) {
            xn.push(x.cast());
            dirs.push(w);
        }
    }
    let (mut mats, mut shs) = (Vec::new(), Vec::new());
    fields.query(&xn, &dirs, code, &mut mats, &mut shs)?;
    Ok(composite(plans, &mats, &shs, kernel))
}

fn pixel_rng(seed: Option<u64>, index: u64) -> Option<ChaCha8Rng> {
    seed.map(|s| {
        let mut r = ChaCha8Rng::seed_from_u64(s);
        r.set_stream(index);
        r
    })
}

/// Radiance along one camera ray, split into layers.
pub fn render_pixel<T: Scalar, F: ShadingFields<T> + ?Sized>(
    ray: &Ray,
    asset: &FaceAsset,
    fields: &F,
    env: &Environment,
    settings: &RenderSettings,
) -> Result<PixelLayers<T>> {
    let code: Vec<T> = env.code.iter().map(|v| T::of(*v)).collect();
    let mut rng = pixel_rng(settings.jitter_seed, 0);
    let plan = plan_ray(ray, asset, env, &fields.scene_box(), settings, rng.as_mut());
    Ok(shade_plans(std::slice::from_ref(&plan), fields, &code, settings.kernel)?[0])
}

/// Layer images of a render.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerImages {
    pub specular: RgbImage,
    pub diffuse: RgbImage,
    pub sss: RgbImage,
    pub background: RgbImage,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderTiming {
    pub width: usize,
    pub height: usize,
    pub rays: usize,
    pub seconds: f64,
}

impl RenderTiming {
    pub const HEADER: &'static str = "resolution rays seconds";

    pub fn to_line(&self) -> String {
        format!("{}x{} {} {:.4}", self.width, self.height, self.rays, self.seconds)
    }
}

#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub image: RgbImage,
    pub layers: LayerImages,
    pub timing: RenderTiming,
}

fn to_f32<T: Scalar>(c: Rgb<T>) -> Rgb<f32> {
    Rgb::new(c.r.as_f64() as f32, c.g.as_f64() as f32, c.b.as_f64() as f32)
}

/// Renders the pixel rectangle `[x0, x0+w) × [y0, y0+h)` in row-major order.
pub fn render_region<T: Scalar, F: ShadingFields<T> + ?Sized>(
    asset: &FaceAsset,
    camera: &Camera,
    fields: &F,
    env: &Environment,
    settings: &RenderSettings,
    rect: (usize, usize, usize, usize),
) -> Result<Vec<PixelLayers<T>>> {
    let (x0, y0, w, h) = rect;
    let code: Vec<T> = env.code.iter().map(|v| T::of(*v)).collect();
    let sb = fields.scene_box();
    let mut plans = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            let mut rng = pixel_rng(settings.jitter_seed, (y * camera.width() + x) as u64);
            plans.push(plan_ray(&camera.ray(x, y), asset, env, &sb, settings, rng.as_mut()));
        }
    }
    shade_plans(&plans, fields, &code, settings.kernel)
}

/// Full image, parallel over tiles. Output is independent of scheduling.
pub fn render_image<T: Scalar, F: ShadingFields<T> + ?Sized>(
    asset: &FaceAsset,
    camera: &Camera,
    fields: &F,
    env: &Environment,
    settings: &RenderSettings,
) -> Result<RenderOutput> {
    settings.validate()?;
    let start = Instant::now();
    let (w, h) = (camera.width(), camera.height());
    let ts = settings.tile_size;
    let tiles: Vec<(usize, usize, usize, usize)> = (0..h.div_ceil(ts))
        .flat_map(|ty| (0..w.div_ceil(ts)).map(move |tx| (tx * ts, ty * ts, ts.min(w - tx * ts), ts.min(h - ty * ts))))
        .collect();
    let results: Vec<Result<Vec<PixelLayers<T>>>> =
        tiles.par_iter().map(|&rect| render_region(asset, camera, fields, env, settings, rect)).collect();

    let mut image = RgbImage::new(w, h);
    let mut layers = LayerImages {
        specular: RgbImage::new(w, h),
        diffuse: RgbImage::new(w, h),
        sss: RgbImage::new(w, h),
        background: RgbImage::new(w, h),
    };
    for (&(x0, y0, tw, _), res) in tiles.iter().zip(results) {
        for (i, px) in res?.into_iter().enumerate() {
            let (x, y) = (x0 + i % tw, y0 + i / tw);
            image.set(x, y, to_f32(px.total()));
            layers.specular.set(x, y, to_f32(px.specular));
            layers.diffuse.set(x, y, to_f32(px.diffuse));
            layers.sss.set(x, y, to_f32(px.sss));
            layers.background.set(x, y, to_f32(px.background));
        }
    }
    let timing = RenderTiming { width: w, height: h, rays: w * h, seconds: start.elapsed().as_secs_f64() };
    Ok(RenderOutput { image, layers, timing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{TextureMap, TriangleMesh};
    use crate::lighting::DirectLightSet;

    fn scene() -> (FaceAsset, Camera, Environment) {
        let mesh = TriangleMesh::uv_sphere(Vec3::zero(), 1.0, 24, 48);
        let asset = FaceAsset::new(mesh, TextureMap::constant(Rgb::new(0.8, 0.6, 0.4)), None);
        let cam = Camera::looking_at(Vec3::new(0.0, 0.0, 4.0), Vec3::zero(), 40.0, 20, 16).unwrap();
        let map = RadianceMap::constant(16, 32, Rgb::new(0.2, 0.3, 0.4));
        let lights = DirectLightSet::single(Vec3::new(0.3, 0.5, 0.8).normalized(), Rgb::splat(3.0), 0.5);
        let env = Environment::with_lights(map, lights, LightCodeSource::DownsampledMap, 18).unwrap();
        (asset, cam, env)
    }

    #[test]
    fn miss_ray_returns_background() {
        let (asset, _, env) = scene();
        let ray = Ray::new(Vec3::new(0.0, 0.0, 4.0), Vec3::new(0.0, 1.0, 0.0));
        let fields = FixedFields::<f64>::new(0.5, Rgb::splat(0.2));
        let px = render_pixel(&ray, &asset, &fields, &env, &RenderSettings::default()).unwrap();
        assert_eq!(px.total(), env.map.lookup(ray.direction));
        assert_eq!(px.diffuse, Rgb::zero());
    }

    #[test]
    fn zero_weights_pass_background_through() {
        let (asset, cam, env) = scene();
        let ray = cam.ray(10, 8);
        let mut plan = plan_ray(&ray, &asset, &env, &SceneBox::unit(), &RenderSettings::default(), None);
        assert!(plan.surface.is_some());
        for s in &mut plan.samples {
            s.weight = 0.0;
        }
        let n = plan.samples.len();
        let mats = vec![MaterialSample { gamma: 1.0, eta: Rgb::splat(0.5) }; n];
        let shs = vec![ShCoeffs12::from_slice(&[1.0; 12]); n];
        let px = composite(std::slice::from_ref(&plan), &mats, &shs, CosineKernel::Clamped)[0];
        assert_eq!(px.total(), plan.background);
    }

    #[test]
    fn layers_sum_to_image() {
        let (asset, cam, env) = scene();
        let fields = FixedFields::<f32>::new(0.7, Rgb::splat(0.3));
        let out = render_image(&asset, &cam, &fields, &env, &RenderSettings::default()).unwrap();
        for y in 0..cam.height() {
            for x in 0..cam.width() {
                let l = &out.layers;
                let s = l.specular.get(x, y).to_f64() + l.diffuse.get(x, y).to_f64() + l.sss.get(x, y).to_f64()
                    + l.background.get(x, y).to_f64();
                let d = s - out.image.get(x, y).to_f64();
                assert!(d.r.abs().max(d.g.abs()).max(d.b.abs()) < 1e-5);
            }
        }
    }

    #[test]
    fn tile_size_does_not_change_image() {
        let (asset, cam, env) = scene();
        let fields = FixedFields::<f64>::new(0.7, Rgb::splat(0.3));
        let mut s = RenderSettings { jitter_seed: Some(3), ..Default::default() };
        let a = render_image(&asset, &cam, &fields, &env, &s).unwrap();
        s.tile_size = 7;
        let b = render_image(&asset, &cam, &fields, &env, &s).unwrap();
        assert_eq!(a.image, b.image);
    }

    #[test]
    fn networks_and_fixed_fields_agree_for_constant_outputs() {
        let (asset, cam, env) = scene();
        let cfg = crate::neural::NetworkConfig { hidden_width: 8, ..Default::default() };
        let nets = Networks::<f64>::zeros(cfg, SceneBox::unit()).unwrap();
        let fixed = FixedFields::<f64>::new(2f64.ln(), Rgb::splat(0.5));
        let s = RenderSettings::default();
        let a = render_image(&asset, &cam, &nets, &env, &s).unwrap();
        let b = render_image(&asset, &cam, &fixed, &env, &s).unwrap();
        assert_eq!(a.image, b.image);
    }

    #[test]
    fn timing_line_lists_resolution_and_rays() {
        let t = RenderTiming { width: 64, height: 32, rays: 2048, seconds: 0.5 };
        assert_eq!(t.to_line(), "64x32 2048 0.5000");
    }
}
