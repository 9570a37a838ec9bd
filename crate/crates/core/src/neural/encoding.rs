//! Sinusoidal frequency encoding.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodingSpec {
    pub num_frequencies: usize,
    pub include_identity: bool,
}

impl EncodingSpec {
    pub const POSITION: EncodingSpec = EncodingSpec { num_frequencies: 10, include_identity: true };
    pub const DIRECTION: EncodingSpec = EncodingSpec { num_frequencies: 4, include_identity: true };

    pub fn new(num_frequencies: usize, include_identity: bool) -> Self {
        Self { num_frequencies, include_identity }
    }

    pub fn output_width(&self, input_width: usize) -> usize {
        input_width * (self.include_identity as usize + 2 * self.num_frequencies)
    }

    /// Writes `(x, sin(2⁰πx), cos(2⁰πx), …, sin(2^{L−1}πx), cos(2^{L−1}πx))` into `out`,
    /// each block holding every component of `x`.
    pub fn encode_into<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        let d = x.len();
        debug_assert_eq!(out.len(), self.output_width(d));
        let mut o = 0;
        if self.include_identity {
            out[..d].copy_from_slice(x);
            o = d;
        }
        let mut freq = T::PI();
        for _ in 0..self.num_frequencies {
            for (j, &xj) in x.iter().enumerate() {
                let (s, c) = (freq * xj).sin_cos();
                out[o + j] = s;
                out[o + d + j] = c;
            }
            o += 2 * d;
            freq = freq + freq;
        }
    }
}

pub fn freq_encode<T: Scalar>(x: &[T], spec: &EncodingSpec) -> Vec<T> {
    let mut out = vec![T::zero(); spec.output_width(x.len())];
    spec.encode_into(x, &mut out);
    out
}
