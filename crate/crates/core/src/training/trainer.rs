//! The optimization loop: batches, Adam steps, checkpoints and the loss curve.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{batch_loss_and_grads, sample_ray_batch, NetGrads, RayTarget, TrainingScene};
use super::metrics::{psnr, ssim, MetricsReport, ViewMetrics};
use crate::error::{Error, Result};
use crate::neural::{save_checkpoint, AdamConfig, AdamState, Checkpoint, NetworkConfig, Networks, TrainState};
use crate::math::Rgb;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_rays: usize,
    pub iterations: u64,
    pub lr: f64,
    /// Learning rate at the final iteration relative to `lr`; decay is exponential.
    pub lr_final_scale: f64,
    pub seed: u64,
    /// Zero disables periodic checkpoints.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_rays: 1024, iterations: 5000, lr: 5e-4, lr_final_scale: 0.1, seed: 7, checkpoint_every: 1000 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_rays == 0 || self.iterations == 0 {
            return Err(Error::InvalidArgument("batch_rays and iterations must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_final_scale > 0.0 && self.lr_final_scale <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} and final scale {} out of range",
                self.lr, self.lr_final_scale
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, iteration: u64) -> f64 {
        self.lr * self.lr_final_scale.powf(iteration as f64 / self.iterations as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub iteration: u64,
    pub loss: f64,
}

/// CSV `iter,loss`, one row per record.
pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut s = String::from("iter,loss\n");
    for r in records {
        let _ = writeln!(s, "{},{:e}", r.iteration, r.loss);
    }
    s
}

/// Means of consecutive `window`-sized blocks of the loss curve.
pub fn window_means(records: &[LossRecord], window: usize) -> Vec<f64> {
    records.chunks_exact(window.max(1)).map(|c| c.iter().map(|r| r.loss).sum::<f64>() / c.len() as f64).collect()
}

pub struct Trainer<'a> {
    pub scene: &'a TrainingScene,
    pub config: TrainConfig,
    pub networks: Networks<f32>,
    pub state: TrainState,
    pub losses: Vec<LossRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(scene: &'a TrainingScene, config: TrainConfig, network: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let networks = Networks::new(network, scene.scene_box, config.seed)?;
        let adam = AdamConfig { lr: config.lr, ..Default::default() };
        let state = TrainState {
            iteration: 0,
            material: AdamState::new(networks.material.mlp.param_count(), adam),
            light_field: AdamState::new(networks.light_field.mlp.param_count(), adam),
        };
        Ok(Self { scene, config, networks, state, losses: Vec::new() })
    }

    /// Continues from a checkpoint that carries optimizer state.
    pub fn resume(scene: &'a TrainingScene, config: TrainConfig, checkpoint: Checkpoint) -> Result<Self> {
        config.validate()?;
        let state = checkpoint
            .train_state
            .ok_or_else(|| Error::InvalidArgument("checkpoint has no optimizer state to resume from".into()))?;
        Ok(Self { scene, config, networks: checkpoint.networks, state, losses: Vec::new() })
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration >= self.config.iterations
    }

    /// One optimization step; returns the batch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let it = self.state.iteration;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(it);
        let batch = sample_ray_batch(&self.scene.dataset, &mut rng, self.config.batch_rays)?;
        let plans: Vec<_> = batch.pixels.iter().map(|p| self.scene.plan(p.view, p.x, p.y)).collect();
        let codes: Vec<Vec<f32>> = (0..self.scene.dataset.views.len()).map(|v| self.scene.code::<f32>(v)).collect();
        let rays: Vec<RayTarget<'_, f32>> = batch
            .pixels
            .iter()
            .zip(&plans)
            .zip(&batch.targets)
            .map(|((p, plan), t)| RayTarget { plan, code: &codes[p.view], target: t.cast() })
            .collect();
        let mut grads = NetGrads::zeros(&self.networks);
        let out = batch_loss_and_grads(&self.networks, &rays, self.scene.settings.kernel, &mut grads)?;
        let loss = out.loss as f64;
        if !loss.is_finite() || !grads.all_finite() {
            let bad = out.predictions.iter().position(|p: &Rgb<f32>| !p.is_finite());
            let detail = match bad {
                Some(i) => {
                    let p = batch.pixels[i];
                    format!(
                        "batch {it}: ray {i} (view {}, pixel {},{}) predicted {:?}",
                        p.view, p.x, p.y, out.predictions[i]
                    )
                }
                None => format!("batch {it}: loss {loss}, non-finite parameter gradient"),
            };
            return Err(Error::NonFiniteLoss { iteration: it as usize, detail });
        }
        let lr = self.config.lr_at(it);
        self.state.material.step_with_lr(self.networks.material.mlp.params_mut(), &grads.material, lr)?;
        self.state.light_field.step_with_lr(self.networks.light_field.mlp.params_mut(), &grads.light_field, lr)?;
        self.state.iteration += 1;
        self.losses.push(LossRecord { iteration: it, loss });
        Ok(loss)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(path, &self.networks, Some(&self.state))
    }

    /// Runs to completion, writing `ckpt_<iter>.lfck` files into `checkpoint_dir` at the configured cadence.
    pub fn run(&mut self, checkpoint_dir: Option<&Path>, mut on_step: impl FnMut(u64, f64)) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        while !self.is_done() {
            let loss = self.step()?;
            on_step(self.state.iteration, loss);
            if let Some(dir) = checkpoint_dir {
                let every = self.config.checkpoint_every;
                if (every > 0 && self.state.iteration % every == 0) || self.is_done() {
                    let path = dir.join(format!("ckpt_{:06}.lfck", self.state.iteration));
                    self.save_checkpoint(&path)?;
                    written.push(path);
                }
            }
        }
        Ok(written)
    }

    pub fn loss_csv(&self) -> String {
        loss_csv(&self.losses)
    }

    /// PSNR and SSIM of every training view rendered with the current networks.
    pub fn evaluate(&self) -> Result<MetricsReport> {
        evaluate_views(self.scene, &self.networks)
    }
}

pub fn evaluate_views(scene: &TrainingScene, networks: &Networks<f32>) -> Result<MetricsReport> {
    let mut per_view = Vec::new();
    for (i, v) in scene.dataset.views.iter().enumerate() {
        let img = scene.render_view(networks, i)?;
        per_view.push(ViewMetrics { name: format!("view{i:03}"), psnr: psnr(&img, &v.image)?, ssim: ssim(&img, &v.image)? });
    }
    Ok(MetricsReport::from_views(per_view))
}
