use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Lift, Real};

use super::{check_widths, NetworkError};

/// Fully connected network, tanh on hidden layers and a linear output.
///
/// Parameters per layer: row-major weights `[n_out x n_in]`, then `n_out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNetwork {
    widths: Vec<usize>,
}

impl MlpNetwork {
    pub fn new(widths: &[usize]) -> Result<Self, NetworkError> {
        check_widths(widths)?;
        Ok(MlpNetwork {
            widths: widths.to_vec(),
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Glorot-normal weights, zero biases.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for w in self.widths.windows(2) {
            let std = (2.0 / (w[0] + w[1]) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("valid std");
            for _ in 0..w[0] * w[1] {
                out.push(normal.sample(rng));
            }
            out.extend(std::iter::repeat_n(0.0, w[1]));
        }
        out
    }

    pub fn forward<P: Real, T: Lift<P>>(&self, params: &[P], x: &[T]) -> Vec<T> {
        let mut cur: Vec<T> = x.to_vec();
        let mut offset = 0;
        let layers = self.widths.len() - 1;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[offset..offset + n_in * n_out];
            let bias = &params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            offset += (n_in + 1) * n_out;
            let mut next = Vec::with_capacity(n_out);
            for q in 0..n_out {
                let mut acc = T::lift(bias[q]);
                for p in 0..n_in {
                    acc = acc + T::lift(weights[q * n_in + p]) * cur[p];
                }
                next.push(if l + 1 < layers { acc.tanh() } else { acc });
            }
            cur = next;
        }
        cur
    }
}
