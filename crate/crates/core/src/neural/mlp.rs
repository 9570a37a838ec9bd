//! Fixed-topology MLP with a mid-network feature injection and a hand-written
//! reverse pass.
//!
//! All layers share one flat parameter buffer. Each weight matrix is stored
//! `fan_in × fan_out` row-major followed by its bias, so a batch forward is a
//! single `X · W` product per layer.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{gemm, MatRef, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Softplus,
    Sigmoid,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Softplus => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Softplus,
            3 => Activation::Sigmoid,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Softplus => z.max(T::zero()) + (-z.abs()).exp().ln_1p(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
        }
    }
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpConfig {
    pub input_width: usize,
    pub hidden_width: usize,
    /// Number of hidden ReLU layers.
    pub depth: usize,
    /// 1-based hidden layer whose input gets the injected features appended.
    pub inject_layer: usize,
    pub inject_width: usize,
    /// One activation per output.
    pub head: Vec<Activation>,
}

impl MlpConfig {
    pub fn output_width(&self) -> usize {
        self.head.len()
    }

    fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.hidden_width == 0 || self.depth == 0 || self.head.is_empty() {
            return Err(Error::InvalidArgument(format!("degenerate MLP shape {self:?}")));
        }
        if self.inject_layer == 0 || self.inject_layer > self.depth {
            return Err(Error::InvalidArgument(format!(
                "inject layer {} outside 1..={}",
                self.inject_layer, self.depth
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    config: MlpConfig,
    layers: Vec<LayerShape>,
    params: Vec<T>,
    version: u64,
}

/// Activations cached by [`Mlp::forward`]; consumed by [`Mlp::backward`].
#[derive(Debug)]
pub struct GradTape<T> {
    version: u64,
    batch: usize,
    /// Input matrix of each layer (head included), `batch × fan_in`.
    inputs: Vec<Vec<T>>,
    /// Head pre-activations, `batch × outputs`.
    head_z: Vec<T>,
}

impl<T> GradTape<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Gradients with respect to the network inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct InputGrads<T> {
    pub base: Vec<T>,
    pub injected: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    fn shapes(config: &MlpConfig) -> Vec<LayerShape> {
        let mut layers = Vec::with_capacity(config.depth + 1);
        let mut offset = 0;
        for l in 0..=config.depth {
            let mut fan_in = if l == 0 { config.input_width } else { config.hidden_width };
            if l + 1 == config.inject_layer {
                fan_in += config.inject_width;
            }
            let fan_out = if l == config.depth { config.output_width() } else { config.hidden_width };
            layers.push(LayerShape { fan_in, fan_out, w: offset, b: offset + fan_in * fan_out });
            offset += fan_in * fan_out + fan_out;
        }
        layers
    }

    /// All parameters zero.
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = Self::shapes(&config);
        let n = layers.last().map_or(0, |l| l.b + l.fan_out);
        Ok(Self { config, layers, params: vec![T::zero(); n], version: 0 })
    }

    /// He-uniform weights (`±√(6/fan_in)`), zero biases.
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in mlp.layers.clone() {
            let bound = (6.0 / layer.fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for p in &mut mlp.params[layer.w..layer.b] {
                *p = T::of(dist.sample(&mut rng));
            }
        }
        Ok(mlp)
    }

    pub fn from_params(config: MlpConfig, params: Vec<T>) -> Result<Self> {
        let mut mlp = Self::zeros(config)?;
        if params.len() != mlp.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "parameter vector has {} entries, network needs {}",
                params.len(),
                mlp.params.len()
            )));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Mutable access; invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [T] {
        self.version += 1;
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Offset of the bias vector of the head layer in the flat buffer.
    pub fn head_bias_offset(&self) -> usize {
        self.layers[self.config.depth].b
    }

    /// Offsets `(weights, biases)` of layer `l` (the head is `depth`).
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        (self.layers[l].w, self.layers[l].b)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_inputs(&self, input: &[T], injected: &[T], batch: usize) -> Result<()> {
        if input.len() != batch * self.config.input_width {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, expected {} × {}",
                input.len(),
                batch,
                self.config.input_width
            )));
        }
        if injected.len() != batch * self.config.inject_width {
            return Err(Error::ShapeMismatch(format!(
                "injected features have {} values, expected {} × {}",
                injected.len(),
                batch,
                self.config.inject_width
            )));
        }
        Ok(())
    }

    /// Builds the input matrix of layer `l` from the previous activation.
    fn layer_input(&self, l: usize, prev: Vec<T>, injected: &[T], batch: usize) -> Vec<T> {
        if l + 1 != self.config.inject_layer || self.config.inject_width == 0 {
            return prev;
        }
        let a = prev.len() / batch.max(1);
        let k = self.config.inject_width;
        let mut x = Vec::with_capacity(batch * (a + k));
        for i in 0..batch {
            x.extend_from_slice(&prev[i * a..(i + 1) * a]);
            x.extend_from_slice(&injected[i * k..(i + 1) * k]);
        }
        x
    }

    fn affine(&self, l: usize, x: &[T], batch: usize) -> Vec<T> {
        let s = self.layers[l];
        let bias = &self.params[s.b..s.b + s.fan_out];
        let mut z = Vec::with_capacity(batch * s.fan_out);
        for _ in 0..batch {
            z.extend_from_slice(bias);
        }
        gemm(
            T::one(),
            MatRef::new(x, batch, s.fan_in),
            MatRef::new(&self.params[s.w..s.b], s.fan_in, s.fan_out),
            T::one(),
            &mut z,
        );
        z
    }

    fn run(&self, input: &[T], injected: &[T], batch: usize, mut tape: Option<&mut Vec<Vec<T>>>) -> Vec<T> {
        let mut act = input.to_vec();
        for l in 0..=self.config.depth {
            let x = self.layer_input(l, act, injected, batch);
            let mut z = self.affine(l, &x, batch);
            if let Some(t) = tape.as_deref_mut() {
                t.push(x);
            }
            if l < self.config.depth {
                for v in &mut z {
                    *v = v.max(T::zero());
                }
            }
            act = z;
        }
        act
    }

    fn apply_head(&self, z: &[T]) -> Vec<T> {
        let w = self.config.output_width();
        z.iter().enumerate().map(|(i, &v)| self.config.head[i % w].apply(v)).collect()
    }

    /// Batched forward pass; rows of `input` and `injected` are samples.
    pub fn forward(&self, input: &[T], injected: &[T], batch: usize) -> Result<(Vec<T>, GradTape<T>)> {
        self.check_inputs(input, injected, batch)?;
        let mut inputs = Vec::with_capacity(self.config.depth + 1);
        let head_z = self.run(input, injected, batch, Some(&mut inputs));
        let out = self.apply_head(&head_z);
        Ok((out, GradTape { version: self.version, batch, inputs, head_z }))
    }

    /// Forward pass without recording a tape.
    pub fn infer(&self, input: &[T], injected: &[T], batch: usize) -> Result<Vec<T>> {
        self.check_inputs(input, injected, batch)?;
        let z = self.run(input, injected, batch, None);
        Ok(self.apply_head(&z))
    }

    /// Reverse pass. Parameter gradients are **added** to `grads`; input
    /// gradients are returned when requested.
    pub fn backward(
        &self,
        tape: GradTape<T>,
        d_out: &[T],
        grads: &mut [T],
        want_input_grads: bool,
    ) -> Result<Option<InputGrads<T>>> {
        if tape.version != self.version {
            return Err(Error::StaleTape { tape: tape.version, current: self.version });
        }
        let batch = tape.batch;
        let out_w = self.config.output_width();
        if d_out.len() != batch * out_w {
            return Err(Error::ShapeMismatch(format!(
                "output gradient has {} values, expected {} × {}",
                d_out.len(),
                batch,
                out_w
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient buffer has {} entries, network has {}",
                grads.len(),
                self.params.len()
            )));
        }

        let mut dz: Vec<T> = d_out
            .iter()
            .zip(&tape.head_z)
            .enumerate()
            .map(|(i, (&g, &z))| g * self.config.head[i % out_w].derivative(z))
            .collect();
        let mut injected_grad = Vec::new();
        let mut base_grad = Vec::new();

        for l in (0..=self.config.depth).rev() {
            let s = self.layers[l];
            let x = &tape.inputs[l];
            gemm(
                T::one(),
                MatRef::new(x, batch, s.fan_in).t(),
                MatRef::new(&dz, batch, s.fan_out),
                T::one(),
                &mut grads[s.w..s.b],
            );
            let db = &mut grads[s.b..s.b + s.fan_out];
            for row in dz.chunks_exact(s.fan_out) {
                for (g, &d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 && !want_input_grads {
                break;
            }
            let mut dx = vec![T::zero(); batch * s.fan_in];
            gemm(
                T::one(),
                MatRef::new(&dz, batch, s.fan_out),
                MatRef::new(&self.params[s.w..s.b], s.fan_in, s.fan_out).t(),
                T::zero(),
                &mut dx,
            );
            let mut da = if l + 1 == self.config.inject_layer && self.config.inject_width > 0 {
                let k = self.config.inject_width;
                let a = s.fan_in - k;
                let mut split = Vec::with_capacity(batch * a);
                injected_grad = Vec::with_capacity(batch * k);
                for row in dx.chunks_exact(s.fan_in) {
                    split.extend_from_slice(&row[..a]);
                    injected_grad.extend_from_slice(&row[a..]);
                }
                split
            } else {
                dx
            };
            if l == 0 {
                base_grad = da;
                break;
            }
            // ReLU mask: the previous activation is positive exactly where its pre-activation was
            let prev = &tape.inputs[l];
            let prev_w = self.config.hidden_width;
            for (i, v) in da.iter_mut().enumerate() {
                let (r, c) = (i / prev_w, i % prev_w);
                if prev[r * s.fan_in + c] <= T::zero() {
                    *v = T::zero();
                }
            }
            dz = da;
        }

        if !want_input_grads {
            return Ok(None);
        }
        if self.config.inject_width == 0 {
            injected_grad.clear();
        }
        Ok(Some(InputGrads { base: base_grad, injected: injected_grad }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(inject_layer: usize) -> MlpConfig {
        MlpConfig {
            input_width: 3,
            hidden_width: 5,
            depth: 2,
            inject_layer,
            inject_width: 2,
            head: vec![Activation::Softplus, Activation::Sigmoid, Activation::Identity],
        }
    }

    #[test]
    fn parameter_count_includes_injection_fan_in() {
        let m = Mlp::<f64>::zeros(small(2)).unwrap();
        assert_eq!(m.param_count(), (3 * 5 + 5) + ((5 + 2) * 5 + 5) + (5 * 3 + 3));
        let m = Mlp::<f64>::zeros(small(1)).unwrap();
        assert_eq!(m.param_count(), ((3 + 2) * 5 + 5) + (5 * 5 + 5) + (5 * 3 + 3));
        assert!(Mlp::<f64>::zeros(small(3)).is_err());
    }

    #[test]
    fn zero_weights_give_head_activation_of_bias() {
        let mut m = Mlp::<f64>::zeros(small(2)).unwrap();
        let hb = m.head_bias_offset();
        m.params_mut()[hb..hb + 3].copy_from_slice(&[0.0, 0.0, 1.5]);
        let y = m.infer(&[0.3, 0.1, -0.2], &[1.0, 2.0], 1).unwrap();
        assert!((y[0] - 2f64.ln()).abs() < 1e-15);
        assert!((y[1] - 0.5).abs() < 1e-15);
        assert_eq!(y[2], 1.5);
    }

    #[test]
    fn batching_matches_single_calls() {
        let m = Mlp::<f64>::new(small(2), 3).unwrap();
        let xs = [0.1, 0.2, 0.3, -0.5, 0.4, 0.9, 1.0, -1.0, 0.0];
        let inj = [0.5, -0.5, 0.1, 0.2, -0.3, 0.7];
        let batch = m.infer(&xs, &inj, 3).unwrap();
        for i in 0..3 {
            let one = m.infer(&xs[i * 3..i * 3 + 3], &inj[i * 2..i * 2 + 2], 1).unwrap();
            for k in 0..3 {
                assert!((one[k] - batch[i * 3 + k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let m = Mlp::<f32>::new(small(2), 0).unwrap();
        assert!(matches!(m.forward(&[0.0; 4], &[0.0; 2], 1), Err(Error::ShapeMismatch(_))));
        assert!(matches!(m.forward(&[0.0; 3], &[0.0; 3], 1), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut m = Mlp::<f64>::new(small(2), 1).unwrap();
        let (_, tape) = m.forward(&[0.1, 0.2, 0.3], &[0.0, 1.0], 1).unwrap();
        m.params_mut()[0] += 1.0;
        let mut g = vec![0.0; m.param_count()];
        assert!(matches!(m.backward(tape, &[1.0; 3], &mut g, false), Err(Error::StaleTape { .. })));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let m = Mlp::<f64>::new(small(2), 5).unwrap();
        let (_, tape) = m.forward(&[0.1, 0.2, 0.3], &[0.4, 0.5], 1).unwrap();
        let mut g = vec![0.0; m.param_count()];
        let ig = m.backward(tape, &[0.0; 3], &mut g, true).unwrap().unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(ig.base.iter().chain(&ig.injected).all(|v| *v == 0.0));
    }

    #[test]
    fn dead_relu_unit_gets_no_gradient() {
        let mut m = Mlp::<f64>::new(small(2), 9).unwrap();
        let (w0, b0) = m.layer_offsets(0);
        // unit 0 of the first hidden layer: zero weights, negative bias
        {
            let p = m.params_mut();
            for i in 0..3 {
                p[w0 + i * 5] = 0.0;
            }
            p[b0] = -1.0;
        }
        let (_, tape) = m.forward(&[0.3, -0.2, 0.8], &[0.1, 0.1], 1).unwrap();
        let mut g = vec![0.0; m.param_count()];
        m.backward(tape, &[1.0, 1.0, 1.0], &mut g, false).unwrap();
        assert_eq!(g[b0], 0.0);
        for i in 0..3 {
            assert_eq!(g[w0 + i * 5], 0.0);
        }
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        assert_eq!(Activation::Softplus.apply(1000.0f64), 1000.0);
        assert!(Activation::Softplus.apply(-1000.0f64) >= 0.0);
        assert!(Activation::Sigmoid.apply(-1000.0f32).is_finite());
    }
}
