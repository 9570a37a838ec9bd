//! Desk-scale supervised training against analytic reference images.

pub mod batch;
pub mod dataset;
pub mod metrics;
pub mod reference;
pub mod trainer;

pub use batch::{
    batch_loss_and_grads, mse_loss, sample_ray_batch, BatchOutput, NetGrads, PixelRecord, PixelRef, RayBatch, RayTarget,
    TrainingScene, CHUNK_RAYS,
};
pub use dataset::{Dataset, EnvironmentEntry, Manifest, View};
pub use metrics::{compute_metrics, format_psnr, psnr, ssim, MetricsReport, ViewMetrics};
pub use reference::{
    generate_reference_dataset, lambert_phong, reference_image, AnalyticSphere, EnvSpec, SphereSceneSpec, ViewRing,
};
pub use trainer::{evaluate_views, loss_csv, window_means, LossRecord, TrainConfig, Trainer};
