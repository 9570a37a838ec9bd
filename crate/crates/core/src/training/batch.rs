//! Cached training scenes, ray batches, the MSE loss and its backward pass.

use rand::Rng;
use rayon::prelude::*;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::lighting::LightCodeSource;
use crate::math::{Rgb, Vec3};
use crate::neural::{Networks, SceneBox};
use crate::scalar::Scalar;
use crate::shfield::{CosineKernel, ShCoeffs12};
use crate::transport::{
    composite, sample_along_ray, sample_terms, sample_terms_backward, Camera, Environment, RayPlan, RenderSettings,
    ShadingFields, SurfacePoint,
};

/// Network-independent data of one dataset pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelRecord {
    pub surface: Option<SurfacePoint>,
    pub background: Rgb<f64>,
}

/// A dataset with every pixel's intersection and direct lighting precomputed.
pub struct TrainingScene {
    pub dataset: Dataset,
    pub environments: Vec<Environment>,
    pub cameras: Vec<Camera>,
    pub pixels: Vec<Vec<PixelRecord>>,
    pub scene_box: SceneBox,
    pub settings: RenderSettings,
}

impl TrainingScene {
    pub fn new(dataset: Dataset, settings: RenderSettings, code_source: LightCodeSource, code_dim: usize) -> Result<Self> {
        dataset.validate()?;
        settings.validate()?;
        let environments = dataset
            .environments
            .iter()
            .map(|e| Environment::with_lights(e.map.clone(), e.lights.clone(), code_source, code_dim))
            .collect::<Result<Vec<_>>>()?;
        let cameras = dataset.views.iter().map(|v| Camera::new(v.camera)).collect::<Result<Vec<_>>>()?;
        let asset = &dataset.asset;
        let pixels = dataset
            .views
            .iter()
            .zip(&cameras)
            .map(|(view, cam)| {
                let env = &environments[view.env];
                (0..cam.width() * cam.height())
                    .into_par_iter()
                    .map(|i| {
                        let ray = cam.ray(i % cam.width(), i / cam.width());
                        let surface = asset.mesh.intersect(&ray).map(|hit| {
                            SurfacePoint::from_hit(
                                asset,
                                &ray,
                                &hit,
                                &env.lights,
                                settings.specular_exponent,
                                settings.shadows,
                            )
                        });
                        PixelRecord { surface, background: env.map.lookup(ray.direction) }
                    })
                    .collect()
            })
            .collect();
        let scene_box = SceneBox::from_aabb(&asset.mesh.bounds());
        Ok(Self { dataset, environments, cameras, pixels, scene_box, settings })
    }

    pub fn plan(&self, view: usize, x: usize, y: usize) -> RayPlan {
        let cam = &self.cameras[view];
        let rec = self.pixels[view][y * cam.width() + x];
        let s = &self.settings;
        let samples = match &rec.surface {
            Some(sp) => sample_along_ray::<rand_chacha::ChaCha8Rng>(
                Some(sp.t0),
                s.samples_per_ray,
                &s.density,
                self.scene_box.half_extent,
                None,
            ),
            None => Vec::new(),
        };
        RayPlan { ray: cam.ray(x, y), background: rec.background, surface: rec.surface, samples }
    }

    pub fn code<T: Scalar>(&self, view: usize) -> Vec<T> {
        self.environments[self.dataset.views[view].env].code.iter().map(|&v| T::of(v)).collect()
    }

    /// Renders a training view from the cached pixel data.
    pub fn render_view<T: Scalar, F: ShadingFields<T>>(&self, fields: &F, view: usize) -> Result<RgbImage> {
        let cam = &self.cameras[view];
        let (w, h) = (cam.width(), cam.height());
        let code = self.code::<T>(view);
        let rows: Vec<Result<Vec<Rgb<f32>>>> = (0..h)
            .into_par_iter()
            .map(|y| {
                let plans: Vec<RayPlan> = (0..w).map(|x| self.plan(view, x, y)).collect();
                let mut xn = Vec::new();
                let mut dirs = Vec::new();
                for p in &plans {
                    let o: Vec3<T> = (-p.ray.direction).cast();
                    for pos in p.sample_positions(&fields.scene_box()) {
                        xn.push(pos.cast());
                        dirs.push(o);
                    }
                }
                let (mut m, mut sh) = (Vec::new(), Vec::new());
                fields.query(&xn, &dirs, &code, &mut m, &mut sh)?;
                Ok(composite(&plans, &m, &sh, self.settings.kernel)
                    .iter()
                    .map(|px| {
                        let c = px.total();
                        Rgb::new(c.r.as_f64() as f32, c.g.as_f64() as f32, c.b.as_f64() as f32)
                    })
                    .collect())
            })
            .collect();
        let mut img = RgbImage::new(w, h);
        for (y, row) in rows.into_iter().enumerate() {
            for (x, c) in row?.into_iter().enumerate() {
                img.set(x, y, c);
            }
        }
        Ok(img)
    }
}

/// Pixel picked for a batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelRef {
    pub view: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayBatch {
    pub pixels: Vec<PixelRef>,
    /// Linear ground truth per pixel.
    pub targets: Vec<Rgb<f64>>,
}

/// `count` pixels drawn uniformly over all (view, pixel) pairs.
pub fn sample_ray_batch<R: Rng>(dataset: &Dataset, rng: &mut R, count: usize) -> Result<RayBatch> {
    let total = dataset.pixel_count();
    if dataset.views.is_empty() || total == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut pixels = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for _ in 0..count {
        let mut k = rng.gen_range(0..total);
        let mut view = 0;
        while k >= dataset.views[view].image.data.len() {
            k -= dataset.views[view].image.data.len();
            view += 1;
        }
        let img = &dataset.views[view].image;
        pixels.push(PixelRef { view, x: k % img.width, y: k / img.width });
        targets.push(img.data[k].to_f64());
    }
    Ok(RayBatch { pixels, targets })
}

/// Mean over pixels and channels of the squared error, with its gradient.
pub fn mse_loss<T: Scalar>(pred: &[Rgb<T>], target: &[Rgb<T>]) -> Result<(T, Vec<Rgb<T>>)> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions vs {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Ok((T::zero(), Vec::new()));
    }
    let count = T::of(3.0 * pred.len() as f64);
    let two = T::of(2.0);
    let mut sum = T::zero();
    let grads = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = *p - *t;
            sum += d.dot(d);
            d * (two / count)
        })
        .collect();
    Ok((sum / count, grads))
}

/// Parameter gradients of both networks.
#[derive(Clone, Debug, PartialEq)]
pub struct NetGrads<T> {
    pub material: Vec<T>,
    pub light_field: Vec<T>,
}

impl<T: Scalar> NetGrads<T> {
    pub fn zeros(nets: &Networks<T>) -> Self {
        Self {
            material: vec![T::zero(); nets.material.mlp.param_count()],
            light_field: vec![T::zero(); nets.light_field.mlp.param_count()],
        }
    }

    fn add(&mut self, o: &Self) {
        for (a, b) in self.material.iter_mut().zip(&o.material) {
            *a += *b;
        }
        for (a, b) in self.light_field.iter_mut().zip(&o.light_field) {
            *a += *b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.material.iter().chain(&self.light_field).all(|g| g.is_finite())
    }
}

/// One ray of a loss evaluation.
pub struct RayTarget<'a, T> {
    pub plan: &'a RayPlan,
    pub code: &'a [T],
    pub target: Rgb<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutput<T> {
    pub loss: T,
    pub predictions: Vec<Rgb<T>>,
}

/// Rays per independently processed chunk; fixed so results do not depend on the thread count.
pub const CHUNK_RAYS: usize = 64;

struct ChunkResult<T> {
    sq_sum: T,
    preds: Vec<Rgb<T>>,
    grads: NetGrads<T>,
}

fn chunk_forward_backward<T: Scalar>(
    nets: &Networks<T>,
    rays: &[RayTarget<'_, T>],
    kernel: CosineKernel,
    scale: T,
) -> Result<ChunkResult<T>> {
    let sb = nets.scene_box;
    let (mut base, mut mat_inj, mut lf_inj) = (Vec::new(), Vec::new(), Vec::new());
    let mut n = 0;
    let mut scratch = Vec::new();
    for r in rays {
        let o: Vec3<T> = (-r.plan.ray.direction).cast();
        for x in r.plan.sample_positions(&sb) {
            scratch.clear();
            nets.material.push_inputs(x.cast(), o, &mut base, &mut scratch);
            mat_inj.extend_from_slice(&scratch);
            lf_inj.extend_from_slice(&scratch);
            lf_inj.extend_from_slice(r.code);
            n += 1;
        }
    }
    let (mat_out, mat_tape) = nets.material.mlp.forward(&base, &mat_inj, n)?;
    let (lf_out, lf_tape) = nets.light_field.mlp.forward(&base, &lf_inj, n)?;

    let mut preds = Vec::with_capacity(rays.len());
    let mut sq_sum = T::zero();
    let mut d_mat = vec![T::zero(); mat_out.len()];
    let mut d_lf = vec![T::zero(); lf_out.len()];
    let mut k = 0;
    for r in rays {
        let p = r.plan;
        let bg: Rgb<T> = p.background.cast();
        let Some(sp) = &p.surface else {
            let d = bg - r.target;
            sq_sum += d.dot(d);
            preds.push(bg);
            continue;
        };
        let start = k;
        let mut pred = Rgb::<T>::zero();
        let mut wsum = 0.0;
        let mut cached = Vec::with_capacity(p.samples.len());
        for s in &p.samples {
            let m = crate::neural::MaterialSample::from_row(&mat_out[4 * k..4 * k + 4]);
            let sh = ShCoeffs12::from_slice(&lf_out[12 * k..12 * k + 12]);
            pred += sample_terms(sp, &m, &sh, kernel).total() * T::of(s.weight);
            wsum += s.weight;
            cached.push((m, sh));
            k += 1;
        }
        pred += bg * T::of(1.0 - wsum);
        let d = pred - r.target;
        sq_sum += d.dot(d);
        preds.push(pred);
        let g_pred = d * scale;
        for (j, (s, (m, sh))) in p.samples.iter().zip(&cached).enumerate() {
            let g = sample_terms_backward(sp, m, sh, kernel, g_pred * T::of(s.weight));
            let i = start + j;
            d_mat[4 * i] = g.gamma;
            d_mat[4 * i + 1] = g.eta.r;
            d_mat[4 * i + 2] = g.eta.g;
            d_mat[4 * i + 3] = g.eta.b;
            d_lf[12 * i..12 * i + 12].copy_from_slice(&g.sh);
        }
    }
    let mut grads = NetGrads::zeros(nets);
    nets.material.mlp.backward(mat_tape, &d_mat, &mut grads.material, false)?;
    nets.light_field.mlp.backward(lf_tape, &d_lf, &mut grads.light_field, false)?;
    Ok(ChunkResult { sq_sum, preds, grads })
}

/// MSE over the rays and its gradient with respect to both networks, added into `grads`.
pub fn batch_loss_and_grads<T: Scalar>(
    nets: &Networks<T>,
    rays: &[RayTarget<'_, T>],
    kernel: CosineKernel,
    grads: &mut NetGrads<T>,
) -> Result<BatchOutput<T>> {
    if rays.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let count = T::of(3.0 * rays.len() as f64);
    let scale = T::of(2.0) / count;
    let chunks: Vec<Result<ChunkResult<T>>> =
        rays.par_chunks(CHUNK_RAYS).map(|c| chunk_forward_backward(nets, c, kernel, scale)).collect();
    let mut sq_sum = T::zero();
    let mut predictions = Vec::with_capacity(rays.len());
    for c in chunks {
        let c = c?;
        sq_sum += c.sq_sum;
        predictions.extend(c.preds);
        grads.add(&c.grads);
    }
    Ok(BatchOutput { loss: sq_sum / count, predictions })
}
