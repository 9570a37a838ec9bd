//! Closed-form reference images of a textured sphere.

use std::f64::consts::{FRAC_1_PI, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, EnvironmentEntry, View};
use crate::assets::{FaceAsset, RadianceMap, TextureMap, TriangleMesh};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::lighting::{generate_olat, DirectLightSet, LightSampling, OlatSpec};
use crate::math::{reflect, Ray, Rgb, Vec3};
use crate::transport::{Camera, CameraSpec};

/// Exact sphere used by the reference renderer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSphere {
    pub center: Vec3<f64>,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereHit {
    pub t: f64,
    pub normal: Vec3<f64>,
    pub uv: [f64; 2],
}

impl AnalyticSphere {
    /// Nearest intersection with `t > eps`.
    pub fn intersect(&self, ray: &Ray, eps: f64) -> Option<SphereHit> {
        let oc = ray.origin - self.center;
        let b = oc.dot(ray.direction);
        let c = oc.length_squared() - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let t = if -b - s > eps { -b - s } else if -b + s > eps { -b + s } else { return None };
        let normal = (ray.at(t) - self.center) * (1.0 / self.radius);
        Some(SphereHit { t, normal, uv: sphere_uv(normal) })
    }
}

/// Texture coordinate of a unit direction, matching [`TriangleMesh::uv_sphere`].
pub fn sphere_uv(n: Vec3<f64>) -> [f64; 2] {
    let mut phi = n.z.atan2(n.x);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    [phi / (2.0 * PI), 1.0 - n.y.clamp(-1.0, 1.0).acos() / PI]
}

/// `ρ/π Σ L max(0, ω_i·n) Δω + k_s Σ L max(0, ω_o·R)^e Δω`.
pub fn lambert_phong(
    albedo: Rgb<f64>,
    n: Vec3<f64>,
    omega_o: Vec3<f64>,
    lights: &DirectLightSet,
    k_s: f64,
    exponent: f64,
) -> Rgb<f64> {
    let mut diffuse = Rgb::zero();
    let mut specular = Rgb::zero();
    for l in &lights.samples {
        let cos_i = l.direction.dot(n);
        if cos_i <= 0.0 {
            continue;
        }
        diffuse += l.radiance * (cos_i * l.solid_angle);
        if k_s != 0.0 {
            let lobe = omega_o.dot(reflect(l.direction, n));
            if lobe > 0.0 {
                specular += l.radiance * (lobe.powf(exponent) * l.solid_angle);
            }
        }
    }
    albedo * diffuse * FRAC_1_PI + specular * k_s
}

/// Reference image of the sphere: shaded where hit, environment lookup elsewhere.
pub fn reference_image(
    sphere: &AnalyticSphere,
    albedo: &TextureMap,
    lights: &DirectLightSet,
    background: &RadianceMap,
    camera: &Camera,
    k_s: f64,
    exponent: f64,
) -> RgbImage {
    RgbImage::from_fn(camera.width(), camera.height(), |x, y| {
        let ray = camera.ray(x, y);
        let c = match sphere.intersect(&ray, 0.0) {
            Some(h) => lambert_phong(albedo.sample(h.uv), h.normal, -ray.direction, lights, k_s, exponent),
            None => background.lookup(ray.direction),
        };
        Rgb::new(c.r as f32, c.g as f32, c.b as f32)
    })
}

/// Lighting of one dataset environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvSpec {
    /// Sky gradient with a soft sun lobe `sun_radiance · max(0, d·s)^sharpness`.
    Sky { sun: [f64; 3], sun_radiance: [f64; 3], sharpness: f64, zenith: [f64; 3], horizon: [f64; 3] },
    /// Spherical cap light on a black map.
    Olat { center: [f64; 3], radius_deg: f64, radiance: [f64; 3] },
    /// One explicit directional light; the map only provides the background.
    Directional { direction: [f64; 3], radiance: [f64; 3], solid_angle: f64, background: [f64; 3] },
}

impl EnvSpec {
    pub fn map(&self, rows: usize, cols: usize) -> Result<RadianceMap> {
        let rgb = |a: [f64; 3]| Rgb::new(a[0], a[1], a[2]);
        match *self {
            EnvSpec::Sky { sun, sun_radiance, sharpness, zenith, horizon } => {
                let s = Vec3::from_array(sun).normalized();
                let (z, h, sr) = (rgb(zenith), rgb(horizon), rgb(sun_radiance));
                Ok(RadianceMap::from_fn(rows, cols, move |d| {
                    let sky = if d.y >= 0.0 { z * d.y + h * (1.0 - d.y) } else { h * (1.0 + 0.5 * d.y) };
                    sky + sr * d.dot(s).max(0.0).powf(sharpness)
                }))
            }
            EnvSpec::Olat { center, radius_deg, radiance } => generate_olat(
                &OlatSpec { center: Vec3::from_array(center), angular_radius: radius_deg.to_radians(), radiance: rgb(radiance) },
                rows,
                cols,
            ),
            EnvSpec::Directional { background, .. } => {
                let c = rgb(background);
                Ok(RadianceMap::constant(rows, cols, Rgb::new(c.r as f32, c.g as f32, c.b as f32)))
            }
        }
    }

    pub fn lights(&self, map: &RadianceMap, sampling: &LightSampling) -> Result<DirectLightSet> {
        match *self {
            EnvSpec::Directional { direction, radiance, solid_angle, .. } => Ok(DirectLightSet::single(
                Vec3::from_array(direction),
                Rgb::new(radiance[0], radiance[1], radiance[2]),
                solid_angle,
            )),
            _ => sampling.sample(map),
        }
    }
}

/// Cameras on a ring around the sphere, cycling through `elevations_deg`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewRing {
    pub count: usize,
    pub distance: f64,
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
    pub elevations_deg: Vec<f64>,
}

impl Default for ViewRing {
    fn default() -> Self {
        Self { count: 8, distance: 4.0, fov_deg: 36.0, width: 64, height: 64, elevations_deg: vec![20.0, -10.0] }
    }
}

impl ViewRing {
    pub fn cameras(&self, target: Vec3<f64>) -> Vec<CameraSpec> {
        (0..self.count)
            .map(|i| {
                let az = 2.0 * PI * i as f64 / self.count as f64;
                let el = if self.elevations_deg.is_empty() {
                    0.0
                } else {
                    self.elevations_deg[i % self.elevations_deg.len()].to_radians()
                };
                let dir = Vec3::new(el.cos() * az.cos(), el.sin(), el.cos() * az.sin());
                CameraSpec {
                    position: (target + dir * self.distance).to_array(),
                    look_at: target.to_array(),
                    fov_deg: self.fov_deg,
                    width: self.width,
                    height: self.height,
                }
            })
            .collect()
    }
}

/// Everything needed to synthesize a sphere dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereSceneSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub mesh_stacks: usize,
    pub mesh_slices: usize,
    /// Albedo texture resolution `[width, height]`; texels drawn from `albedo_range`.
    pub albedo_texels: [usize; 2],
    pub albedo_range: [f64; 2],
    pub specular: f64,
    pub exponent: f64,
    pub env_rows: usize,
    pub env_cols: usize,
    pub environments: Vec<EnvSpec>,
    pub views: ViewRing,
    pub sampling: LightSampling,
    pub seed: u64,
}

impl Default for SphereSceneSpec {
    fn default() -> Self {
        Self {
            center: [0.0; 3],
            radius: 1.0,
            mesh_stacks: 96,
            mesh_slices: 192,
            albedo_texels: [8, 4],
            albedo_range: [0.25, 0.85],
            specular: 0.3,
            exponent: 32.0,
            env_rows: 64,
            env_cols: 128,
            environments: vec![
                EnvSpec::Sky {
                    sun: [0.6, 0.7, 0.4],
                    sun_radiance: [6.0, 5.5, 5.0],
                    sharpness: 64.0,
                    zenith: [0.25, 0.35, 0.6],
                    horizon: [0.35, 0.3, 0.25],
                },
                EnvSpec::Sky {
                    sun: [-0.7, 0.4, -0.5],
                    sun_radiance: [4.0, 4.5, 6.0],
                    sharpness: 48.0,
                    zenith: [0.3, 0.3, 0.35],
                    horizon: [0.2, 0.25, 0.3],
                },
            ],
            views: ViewRing::default(),
            sampling: LightSampling::default(),
            seed: 7,
        }
    }
}

impl SphereSceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.radius > 0.0) {
            return bad("sphere radius must be positive");
        }
        if self.environments.is_empty() || self.views.count == 0 {
            return bad("scene needs at least one environment and one view");
        }
        if self.albedo_texels[0] == 0 || self.albedo_texels[1] == 0 || self.env_rows == 0 || self.env_cols == 0 {
            return bad("texture and environment dimensions must be positive");
        }
        let [lo, hi] = self.albedo_range;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return bad("albedo range must satisfy 0 ≤ lo ≤ hi ≤ 1");
        }
        Ok(())
    }

    pub fn sphere(&self) -> AnalyticSphere {
        AnalyticSphere { center: Vec3::from_array(self.center), radius: self.radius }
    }

    /// Seeded albedo texture quantized to 8 bits so it survives a PNG round trip.
    pub fn albedo_texture(&self) -> TextureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let [lo, hi] = self.albedo_range;
        let mut q = || ((lo + (hi - lo) * rng.gen::<f64>()) * 255.0).round() as f32 / 255.0;
        let image = RgbImage::from_fn(self.albedo_texels[0], self.albedo_texels[1], |_, _| Rgb::new(q(), q(), q()));
        TextureMap::new(image, crate::assets::ColorSpace::Linear)
    }

    pub fn asset(&self) -> FaceAsset {
        let mesh = TriangleMesh::uv_sphere(Vec3::from_array(self.center), self.radius, self.mesh_stacks, self.mesh_slices);
        FaceAsset::new(mesh, self.albedo_texture(), None)
    }
}

/// Builds the dataset: view `i` is lit by environment `i mod environments`.
pub fn generate_reference_dataset(spec: &SphereSceneSpec) -> Result<Dataset> {
    spec.validate()?;
    let asset = spec.asset();
    let mut environments = Vec::new();
    for (i, e) in spec.environments.iter().enumerate() {
        let map = e.map(spec.env_rows, spec.env_cols)?;
        let mut lights = e.lights(&map, &spec.sampling)?;
        let id = format!("env{i}");
        lights.source = id.clone();
        environments.push(EnvironmentEntry { id, map, lights });
    }
    let sphere = spec.sphere();
    let views = spec
        .views
        .cameras(sphere.center)
        .into_iter()
        .enumerate()
        .map(|(i, cam)| {
            let env = i % environments.len();
            let e = &environments[env];
            let image = reference_image(&sphere, &asset.albedo, &e.lights, &e.map, &Camera::new(cam)?, spec.specular, spec.exponent);
            Ok(View { camera: cam, env, image })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { asset, environments, views })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_pixel_matches_hand_value() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let lights = DirectLightSet::single(n, Rgb::splat(1.0), PI);
        let c = lambert_phong(Rgb::splat(0.8), n, n, &lights, 0.0, 32.0);
        assert!((c.r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unlit_side_is_black() {
        let n = Vec3::new(0.0, 0.0, 1.0);
        let lights = DirectLightSet::single(-n, Rgb::splat(5.0), 1.0);
        assert_eq!(lambert_phong(Rgb::splat(0.8), n, n, &lights, 1.0, 8.0), Rgb::zero());
    }

    #[test]
    fn sphere_intersection_from_outside() {
        let s = AnalyticSphere { center: Vec3::zero(), radius: 1.0 };
        let h = s.intersect(&Ray::new(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, -1.0)), 0.0).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert!((h.normal.z - 1.0).abs() < 1e-12);
        assert!(s.intersect(&Ray::new(Vec3::new(0.0, 2.0, 3.0), Vec3::new(0.0, 0.0, -1.0)), 0.0).is_none());
    }

    #[test]
    fn sphere_uv_matches_mesh_vertices() {
        let mesh = TriangleMesh::uv_sphere(Vec3::zero(), 1.0, 6, 12);
        for (p, uv) in mesh.positions.iter().zip(&mesh.uvs) {
            if p.y.abs() > 0.999 || uv[0] == 1.0 {
                continue;
            }
            let a = sphere_uv(p.normalized());
            assert!((a[0] - uv[0]).abs() < 1e-9 && (a[1] - uv[1]).abs() < 1e-9, "{a:?} vs {uv:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SphereSceneSpec {
            views: ViewRing { count: 2, width: 12, height: 10, ..Default::default() },
            sampling: LightSampling { n_lights: 64, ..Default::default() },
            ..Default::default()
        };
        let a = generate_reference_dataset(&spec).unwrap();
        let b = generate_reference_dataset(&spec).unwrap();
        for (va, vb) in a.views.iter().zip(&b.views) {
            assert_eq!(va.image, vb.image);
        }
        assert_eq!(a.views[1].env, 1);
    }
}
