//! Pinhole camera.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Ray, Vec3};

/// Serializable camera description; `fov_deg` is the vertical field of view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub spec: CameraSpec,
    origin: Vec3<f64>,
    forward: Vec3<f64>,
    right: Vec3<f64>,
    up: Vec3<f64>,
    tan_half: f64,
}

impl Camera {
    pub fn new(spec: CameraSpec) -> Result<Self> {
        let fov = spec.fov_deg.to_radians();
        if !(fov > 0.0 && fov < std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!("field of view {}° outside (0, 180)", spec.fov_deg)));
        }
        if spec.width == 0 || spec.height == 0 {
            return Err(Error::InvalidArgument("camera needs positive image dimensions".into()));
        }
        let origin = Vec3::from_array(spec.position);
        let dir = Vec3::from_array(spec.look_at) - origin;
        if !(dir.length() > 0.0) {
            return Err(Error::DegenerateCamera);
        }
        let forward = dir.normalized();
        let world_up = Vec3::new(0.0, 1.0, 0.0);
        let right = forward.cross(world_up);
        if right.length() < 1e-9 {
            return Err(Error::DegenerateCamera);
        }
        let right = right.normalized();
        let up = right.cross(forward);
        Ok(Self { spec, origin, forward, right, up, tan_half: (0.5 * fov).tan() })
    }

    pub fn looking_at(position: Vec3<f64>, look_at: Vec3<f64>, fov_deg: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(CameraSpec { position: position.to_array(), look_at: look_at.to_array(), fov_deg, width, height })
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn position(&self) -> Vec3<f64> {
        self.origin
    }

    pub fn forward(&self) -> Vec3<f64> {
        self.forward
    }

    /// Ray through continuous image coordinates; `(0, 0)` is the top-left corner.
    pub fn ray_at(&self, x: f64, y: f64) -> Ray {
        let w = self.spec.width as f64;
        let h = self.spec.height as f64;
        let sx = (2.0 * x / w - 1.0) * self.tan_half * (w / h);
        let sy = (1.0 - 2.0 * y / h) * self.tan_half;
        Ray::new(self.origin, (self.forward + self.right * sx + self.up * sy).normalized())
    }

    /// Ray through the centre of pixel `(px, py)`.
    pub fn ray(&self, px: usize, py: usize) -> Ray {
        self.ray_at(px as f64 + 0.5, py as f64 + 0.5)
    }

    /// Where a world point lands in continuous image coordinates, if in front of the camera.
    pub fn project(&self, p: Vec3<f64>) -> Option<(f64, f64)> {
        let d = p - self.origin;
        let z = d.dot(self.forward);
        if z <= 0.0 {
            return None;
        }
        let w = self.spec.width as f64;
        let h = self.spec.height as f64;
        let sx = d.dot(self.right) / z / (self.tan_half * w / h);
        let sy = d.dot(self.up) / z / self.tan_half;
        Some(((sx + 1.0) * 0.5 * w, (1.0 - sy) * 0.5 * h))
    }
}
