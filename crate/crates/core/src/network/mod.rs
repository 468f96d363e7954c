//! Kolmogorov-Arnold networks with B-spline edge activations, and a tanh MLP
//! baseline. Both keep their architecture separate from their parameters so
//! the same definition runs on `f64`, tape variables and jets.

mod bspline;
mod io;
mod kan;
mod mlp;

pub use bspline::{spline_eval, BSplineBasis, MAX_DEGREE};
pub use io::{load_params, save_params, NetworkHeader};
pub use kan::{init_network, kan_forward, KanEdge, KanNetwork};
pub use mlp::MlpNetwork;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{Lift, Real};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid layer widths {0:?}: need at least two layers of nonzero width")]
    InvalidWidths(Vec<usize>),
    #[error("invalid spline grid: {0}")]
    InvalidGrid(String),
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_widths(widths: &[usize]) -> Result<(), NetworkError> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(NetworkError::InvalidWidths(widths.to_vec()));
    }
    Ok(())
}

/// Which architecture a field is represented with.
#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Kan(KanNetwork),
    Mlp(MlpNetwork),
}

impl Network {
    pub fn widths(&self) -> &[usize] {
        match self {
            Network::Kan(n) => n.widths(),
            Network::Mlp(n) => n.widths(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.widths()[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths().last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        match self {
            Network::Kan(n) => n.num_params(),
            Network::Mlp(n) => n.num_params(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Network::Kan(_) => "kan",
            Network::Mlp(_) => "mlp",
        }
    }

    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            Network::Kan(n) => n.init_params(&mut rng),
            Network::Mlp(n) => n.init_params(&mut rng),
        }
    }

    /// Unchecked forward pass; callers guarantee the input and parameter lengths.
    #[inline]
    pub fn forward<P: Real, T: Lift<P>>(&self, params: &[P], x: &[T]) -> Vec<T> {
        match self {
            Network::Kan(n) => n.forward(params, x),
            Network::Mlp(n) => n.forward(params, x),
        }
    }

    pub fn try_forward<P: Real, T: Lift<P>>(&self, params: &[P], x: &[T]) -> Result<Vec<T>, NetworkError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if params.len() != self.num_params() {
            return Err(NetworkError::DimensionMismatch {
                what: "network parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        Ok(self.forward(params, x))
    }
}
