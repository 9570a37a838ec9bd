//! Physically-based neural shading of a textured mesh under HDR environment light.

pub mod assets;
pub mod error;
pub mod image;
pub mod lighting;
pub mod math;
pub mod neural;
pub mod scalar;
pub mod shfield;
pub mod training;
pub mod transport;

pub use error::{Error, ErrorKind, Result};
pub use math::{Ray, Rgb, Vec3};
pub use scalar::Scalar;

pub type Mlp32 = neural::Mlp<f32>;
pub type Mlp64 = neural::Mlp<f64>;
pub type Networks32 = neural::Networks<f32>;
pub type Networks64 = neural::Networks<f64>;
pub type ShCoeffs32 = shfield::ShCoeffs12<f32>;
pub type ShCoeffs64 = shfield::ShCoeffs12<f64>;
pub type MaterialSample32 = neural::MaterialSample<f32>;
pub type PixelLayers32 = transport::PixelLayers<f32>;
