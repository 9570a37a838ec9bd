//! Camera rays, the density-weighted ray quadrature and the shading model.

pub mod camera;
pub mod render;
pub mod shading;
pub mod volume;

pub use camera::{Camera, CameraSpec};
pub use render::{
    composite, plan_ray, render_image, render_pixel, render_region, Environment, FixedFields, LayerImages, PixelLayers,
    PatternFields, RayPlan, RenderOutput, RenderSettings, RenderTiming, ShadingFields,
};
pub use shading::{
    gather_direct, sample_terms, sample_terms_backward, shade_direct_diffuse, shade_direct_specular,
    shade_indirect_sss, shadow_visibility, DirectIntegrals, SampleGrads, SampleTerms, ShadingContext, SurfacePoint,
};
pub use volume::{composite_weights, density, sample_along_ray, DensityParams, PathSample};
