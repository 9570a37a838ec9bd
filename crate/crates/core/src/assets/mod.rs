//! Rendering assets: meshes with a BVH, textures, and HDR environment maps.

mod bvh;
mod hdr;
mod mesh;
mod texture;

pub use bvh::{intersect_triangle, Bvh, PrimHit};
pub use hdr::{pixel_direction, pixel_solid_angle, read_rgbe, rgb_to_rgbe, rgbe_to_rgb, write_rgbe, RadianceMap};
pub use mesh::{Hit, TriangleMesh, RAY_EPSILON};
pub use texture::{decode_normal, linear_to_srgb, srgb_to_linear, ColorSpace, Frame, TextureMap};

use std::path::Path;

use crate::error::Result;

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    TriangleMesh::load_obj(path)
}

pub fn load_texture(path: impl AsRef<Path>, colorspace: ColorSpace) -> Result<TextureMap> {
    TextureMap::load(path, colorspace)
}

pub fn load_hdri(path: impl AsRef<Path>) -> Result<RadianceMap> {
    RadianceMap::load(path)
}

/// Mesh plus the textures that live in its UV space.
#[derive(Clone, Debug)]
pub struct FaceAsset {
    pub mesh: TriangleMesh,
    pub albedo: TextureMap,
    pub normal_map: Option<TextureMap>,
}

impl FaceAsset {
    pub fn new(mesh: TriangleMesh, albedo: TextureMap, normal_map: Option<TextureMap>) -> Self {
        Self { mesh, albedo, normal_map }
    }

    /// Shading normal at a hit: the normal map if present, else the interpolated normal.
    pub fn shading_normal(&self, hit: &Hit) -> crate::math::Vec3<f64> {
        match &self.normal_map {
            Some(map) => decode_normal(map.sample(hit.uv), &hit.frame),
            None => hit.frame.normal,
        }
    }
}
