//! Builds assets, environments, cameras and shading fields from a run configuration.

use std::path::Path;

use lumafield::assets::{ColorSpace, FaceAsset, RadianceMap, TextureMap, TriangleMesh};
use lumafield::neural::{load_checkpoint, MaterialSample, Networks, SceneBox};
use lumafield::shfield::ShCoeffs12;
use lumafield::training::SphereSceneSpec;
use lumafield::transport::{Camera, FixedFields, ShadingFields};
use lumafield::{Result as CoreResult, Rgb, Vec3};

use crate::config::RunConfig;
use crate::fail::Failure;

pub const BUILTIN_SPHERE: &str = "builtin:sphere";
pub const BUILTIN_SPHERE_ON_PLANE: &str = "builtin:sphere-on-plane";

pub fn builtin_mesh(name: &str) -> Option<TriangleMesh> {
    let sphere = || TriangleMesh::uv_sphere(Vec3::zero(), 1.0, 96, 192);
    match name {
        BUILTIN_SPHERE => Some(sphere()),
        BUILTIN_SPHERE_ON_PLANE => Some(TriangleMesh::merge(&[sphere(), TriangleMesh::ground_plane(-1.0, 4.0, 8)])),
        _ => None,
    }
}

pub fn load_asset(cfg: &RunConfig) -> Result<FaceAsset, Failure> {
    let name = cfg.paths.mesh.as_deref().unwrap_or(BUILTIN_SPHERE);
    let mesh = match builtin_mesh(name) {
        Some(m) => m,
        None if name.starts_with("builtin:") => return Err(Failure::config(format!("unknown builtin mesh '{name}'"))),
        None => TriangleMesh::load_obj(name)?,
    };
    let albedo = match &cfg.paths.albedo {
        Some(p) => {
            let cs = if cfg.paths.albedo_srgb { ColorSpace::SrgbDecoded } else { ColorSpace::Linear };
            TextureMap::load(p, cs)?
        }
        None => TextureMap::constant(Rgb::splat(0.8)),
    };
    let normal = match &cfg.paths.normal {
        Some(p) => Some(TextureMap::load(p, ColorSpace::Linear)?),
        None => None,
    };
    Ok(FaceAsset::new(mesh, albedo, normal))
}

/// The configured HDRI, or the default sky when none is given.
pub fn load_map(path: Option<&Path>) -> Result<RadianceMap, Failure> {
    match path {
        Some(p) => Ok(RadianceMap::load(p)?),
        None => {
            let spec = SphereSceneSpec::default();
            Ok(spec.environments[0].map(spec.env_rows, spec.env_cols)?)
        }
    }
}

pub fn camera(cfg: &RunConfig, width: usize, height: usize) -> Result<Camera, Failure> {
    let r = &cfg.render;
    Ok(Camera::looking_at(
        Vec3::from_array(r.camera_position),
        Vec3::from_array(r.look_at),
        r.fov_deg,
        width,
        height,
    )?)
}

/// Networks from a checkpoint or a spatially constant material.
pub enum Fields {
    Networks(Box<Networks<f32>>),
    Fixed(FixedFields<f32>),
}

impl ShadingFields<f32> for Fields {
    fn scene_box(&self) -> SceneBox {
        match self {
            Fields::Networks(n) => n.scene_box(),
            Fields::Fixed(f) => f.scene_box(),
        }
    }

    fn query(
        &self,
        xn: &[Vec3<f32>],
        omega_o: &[Vec3<f32>],
        code: &[f32],
        materials: &mut Vec<MaterialSample<f32>>,
        sh: &mut Vec<ShCoeffs12<f32>>,
    ) -> CoreResult<()> {
        match self {
            Fields::Networks(n) => n.query(xn, omega_o, code, materials, sh),
            Fields::Fixed(f) => f.query(xn, omega_o, code, materials, sh),
        }
    }
}

/// Parses `gamma,eta` or `gamma,eta_r,eta_g,eta_b`.
pub fn parse_fixed_material(s: &str) -> Result<MaterialSample<f32>, Failure> {
    let vals: Vec<f32> = s
        .split(',')
        .map(|t| t.trim().parse::<f32>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::config(format!("--fixed-material '{s}': {e}")))?;
    match vals[..] {
        [g, e] => Ok(MaterialSample { gamma: g, eta: Rgb::splat(e) }),
        [g, r, gg, b] => Ok(MaterialSample { gamma: g, eta: Rgb::new(r, gg, b) }),
        _ => Err(Failure::config(format!("--fixed-material expects 2 or 4 values, got '{s}'"))),
    }
}

pub fn load_fields(cfg: &RunConfig, fixed: Option<&str>, asset: &FaceAsset) -> Result<Fields, Failure> {
    if let Some(s) = fixed {
        let m = parse_fixed_material(s)?;
        let mut f = FixedFields::new(m.gamma, m.eta);
        f.scene_box = SceneBox::from_aabb(&asset.mesh.bounds());
        return Ok(Fields::Fixed(f));
    }
    let path = cfg
        .paths
        .checkpoint
        .as_ref()
        .ok_or_else(|| Failure::config("a checkpoint (--paths.checkpoint) or --fixed-material is required"))?;
    let ck = load_checkpoint(path)?;
    if ck.networks.config.light_code_dim != cfg.network.light_code_dim {
        return Err(Failure::asset(format!(
            "{}: checkpoint light code has {} values, config asks for {}",
            path.display(),
            ck.networks.config.light_code_dim,
            cfg.network.light_code_dim
        )));
    }
    Ok(Fields::Networks(Box::new(ck.networks)))
}
