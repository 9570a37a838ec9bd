//! Multi-view, multi-environment datasets and their TOML manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assets::{ColorSpace, FaceAsset, RadianceMap, TextureMap, TriangleMesh};
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::lighting::DirectLightSet;
use crate::transport::CameraSpec;

#[derive(Clone, Debug)]
pub struct EnvironmentEntry {
    pub id: String,
    pub map: RadianceMap,
    pub lights: DirectLightSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub camera: CameraSpec,
    /// Index into `Dataset::environments`.
    pub env: usize,
    /// Linear ground truth.
    pub image: RgbImage,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub asset: FaceAsset,
    pub environments: Vec<EnvironmentEntry>,
    pub views: Vec<View>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetManifest {
    pub mesh: PathBuf,
    pub albedo: PathBuf,
    #[serde(default)]
    pub albedo_colorspace: ColorSpaceTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_map: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorSpaceTag {
    #[default]
    Linear,
    Srgb,
}

impl From<ColorSpaceTag> for ColorSpace {
    fn from(t: ColorSpaceTag) -> Self {
        match t {
            ColorSpaceTag::Linear => ColorSpace::Linear,
            ColorSpaceTag::Srgb => ColorSpace::SrgbDecoded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentManifest {
    pub id: String,
    pub map: PathBuf,
    pub lights: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewManifest {
    pub env: String,
    pub image: PathBuf,
    pub camera: CameraSpec,
}

/// On-disk description of a dataset; paths are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub asset: AssetManifest,
    pub environments: Vec<EnvironmentManifest>,
    pub views: Vec<ViewManifest>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Manifest(e.to_string()))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, v) in self.views.iter().enumerate() {
            if v.env >= self.environments.len() {
                return Err(Error::Manifest(format!("view {i} references missing environment {}", v.env)));
            }
            if v.image.width != v.camera.width || v.image.height != v.camera.height {
                return Err(Error::Manifest(format!(
                    "view {i}: image is {}x{}, camera is {}x{}",
                    v.image.width, v.image.height, v.camera.width, v.camera.height
                )));
            }
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.views.iter().map(|v| v.image.width * v.image.height).sum()
    }

    /// Loads a dataset from its manifest file.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let manifest = Manifest::parse(&read_text(manifest_path)?)?;
        let root = manifest_path.parent().unwrap_or(Path::new("."));
        let a = &manifest.asset;
        let mesh = TriangleMesh::load_obj(root.join(&a.mesh))?;
        let albedo = TextureMap::load(root.join(&a.albedo), a.albedo_colorspace.into())?;
        let normal_map = match &a.normal_map {
            Some(p) => Some(TextureMap::load(root.join(p), ColorSpace::Linear)?),
            None => None,
        };
        let mut environments = Vec::new();
        for e in &manifest.environments {
            let lights_path = root.join(&e.lights);
            let mut lights = DirectLightSet::from_text(&read_text(&lights_path)?)?;
            lights.source = e.id.clone();
            environments.push(EnvironmentEntry { id: e.id.clone(), map: RadianceMap::load(root.join(&e.map))?, lights });
        }
        let mut views = Vec::new();
        for v in &manifest.views {
            let env = environments
                .iter()
                .position(|e| e.id == v.env)
                .ok_or_else(|| Error::Manifest(format!("view references unknown environment '{}'", v.env)))?;
            views.push(View { camera: v.camera, env, image: RadianceMap::load(root.join(&v.image))?.image });
        }
        let ds = Dataset { asset: FaceAsset::new(mesh, albedo, normal_map), environments, views };
        ds.validate()?;
        Ok(ds)
    }

    /// Writes every file plus `manifest.toml` into `dir`; returns the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.asset.mesh.save_obj(dir.join("mesh.obj"))?;
        self.asset.albedo.save_png(dir.join("albedo.png"))?;
        let normal_map = match &self.asset.normal_map {
            Some(n) => {
                n.save_png(dir.join("normal.png"))?;
                Some(PathBuf::from("normal.png"))
            }
            None => None,
        };
        let albedo_colorspace = match self.asset.albedo.colorspace {
            ColorSpace::Linear => ColorSpaceTag::Linear,
            ColorSpace::SrgbDecoded => ColorSpaceTag::Srgb,
        };
        let mut environments = Vec::new();
        for e in &self.environments {
            let map = PathBuf::from(format!("{}.hdr", e.id));
            let lights = PathBuf::from(format!("{}.lights", e.id));
            e.map.save(dir.join(&map))?;
            e.lights.save(dir.join(&lights))?;
            environments.push(EnvironmentManifest { id: e.id.clone(), map, lights });
        }
        let mut views = Vec::new();
        for (i, v) in self.views.iter().enumerate() {
            let image = PathBuf::from(format!("view{i:03}.hdr"));
            RadianceMap::new(v.image.clone()).save(dir.join(&image))?;
            views.push(ViewManifest { env: self.environments[v.env].id.clone(), image, camera: v.camera });
        }
        let manifest = Manifest {
            asset: AssetManifest { mesh: "mesh.obj".into(), albedo: "albedo.png".into(), albedo_colorspace, normal_map },
            environments,
            views,
        };
        let path = dir.join("manifest.toml");
        fs::write(&path, manifest.to_toml()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_toml() {
        let m = Manifest {
            asset: AssetManifest {
                mesh: "m.obj".into(),
                albedo: "a.png".into(),
                albedo_colorspace: ColorSpaceTag::Srgb,
                normal_map: None,
            },
            environments: vec![EnvironmentManifest { id: "sky".into(), map: "sky.hdr".into(), lights: "sky.lights".into() }],
            views: vec![ViewManifest {
                env: "sky".into(),
                image: "v0.hdr".into(),
                camera: CameraSpec { position: [0.0, 0.0, 4.0], look_at: [0.0; 3], fov_deg: 40.0, width: 8, height: 6 },
            }],
        };
        assert_eq!(Manifest::parse(&m.to_toml().unwrap()).unwrap(), m);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = "[asset]\nmesh='a'\nalbedo='b'\nbogus=1\nenvironments=[]\nviews=[]\n";
        assert!(matches!(Manifest::parse(text), Err(Error::Manifest(_))));
    }
}
