//! Adam optimizer over flat parameter buffers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    /// Applied steps.
    pub step: u64,
    /// Steps rejected because of non-finite gradients.
    pub skipped_steps: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(param_count: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![T::zero(); param_count], v: vec![T::zero(); param_count], step: 0, skipped_steps: 0 }
    }

    /// One update with the configured learning rate.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<bool> {
        self.step_with_lr(params, grads, self.config.lr)
    }

    /// One bias-corrected update. Returns `false` (and counts a skip) when any gradient is non-finite.
    pub fn step_with_lr(&mut self, params: &mut [T], grads: &[T], lr: f64) -> Result<bool> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state holds {} moments, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            self.skipped_steps += 1;
            return Ok(false);
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (ob1, ob2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let step_size = T::of(lr / bc1);
        let inv_bc2 = T::of(1.0 / bc2);
        let eps = T::of(c.eps);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + ob1 * g;
            *v = b2 * *v + ob2 * g * g;
            *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut s = AdamState::<f64>::new(3, AdamConfig { lr: 1e-3, ..Default::default() });
        let mut p = vec![1.0, 2.0, 3.0];
        s.step(&mut p, &[0.5, -2.0, 10.0]).unwrap();
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p[1] - (2.0 + 1e-3)).abs() < 1e-9);
        assert!((p[2] - (3.0 - 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut s = AdamState::<f32>::new(2, AdamConfig::default());
        let mut p = vec![0.25f32, -4.0];
        s.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.25, -4.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn non_finite_gradient_skips() {
        let mut s = AdamState::<f64>::new(2, AdamConfig::default());
        let mut p = vec![1.0, 1.0];
        assert!(!s.step(&mut p, &[f64::NAN, 0.0]).unwrap());
        assert!(!s.step(&mut p, &[0.0, f64::INFINITY]).unwrap());
        assert_eq!((s.step, s.skipped_steps), (0, 2));
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut s = AdamState::<f64>::new(2, AdamConfig::default());
        assert!(s.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
