//! Caputo derivatives of order `alpha` in (0, 1) as a lower-triangular
//! operational matrix built from the L1 scheme.

use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::rc::Rc;

use thiserror::Error;

use crate::autodiff::{LinearMap, Real};

#[derive(Debug, Error)]
pub enum FractionalError {
    #[error("gamma function is only supported for positive arguments, got {0}")]
    GammaDomain(f64),
    #[error("fractional order must lie in (0, 1), got {0}")]
    InvalidOrder(f64),
    #[error("grid must have at least 2 points, got {0}")]
    GridTooShort(usize),
    #[error("grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `Gamma(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64, FractionalError> {
    if x > 0.0 && x.is_finite() {
        Ok(statrs::function::gamma::gamma(x))
    } else {
        Err(FractionalError::GammaDomain(x))
    }
}

/// Rows of a lower-triangular matrix packed one after another.
#[derive(Debug)]
struct PackedLower {
    m: usize,
    data: Vec<f64>,
}

impl PackedLower {
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }
}

impl LinearMap for PackedLower {
    fn rows(&self) -> usize {
        self.m
    }

    fn cols(&self) -> usize {
        self.m
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_transpose_add(&self, y: &[f64], x: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (xk, a) in x.iter_mut().zip(self.row(i)) {
                    *xk += a * yi;
                }
            }
        }
    }
}

/// Operational matrix `D` with `(D xi)_i ~ D^alpha xi(t_i)`.
///
/// Row `i` carries `-l_0 / G` at column 0, `(l_{k-1} - l_k) / G` at columns
/// `0 < k < i` and `l_{i-1} / G` on the diagonal, where
/// `l_k = ((t_i - t_k)^(1-alpha) - (t_i - t_{k+1})^(1-alpha)) / (t_{k+1} - t_k)`
/// and `G = Gamma(2 - alpha)`. Row 0 is zero.
#[derive(Clone, Debug)]
pub struct CaputoMatrix {
    alpha: f64,
    grid: Vec<f64>,
    packed: Rc<PackedLower>,
}

impl CaputoMatrix {
    pub fn new(alpha: f64, grid: &[f64]) -> Result<Self, FractionalError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(FractionalError::InvalidOrder(alpha));
        }
        let m = grid.len();
        if m < 2 {
            return Err(FractionalError::GridTooShort(m));
        }
        if let Some(i) = (1..m).find(|&i| !(grid[i] > grid[i - 1])) {
            return Err(FractionalError::NonMonotoneGrid(i));
        }
        let beta = 1.0 - alpha;
        let g = gamma(2.0 - alpha)?;
        let mut data = Vec::with_capacity(m * (m + 1) / 2);
        let mut lambda = Vec::with_capacity(m);
        for i in 0..m {
            let ti = grid[i];
            lambda.clear();
            for k in 0..i {
                let a = (ti - grid[k]).powf(beta);
                let b = (ti - grid[k + 1]).powf(beta);
                lambda.push((a - b) / (grid[k + 1] - grid[k]));
            }
            if i == 0 {
                data.push(0.0);
                continue;
            }
            data.push(-lambda[0] / g);
            for k in 1..i {
                data.push((lambda[k - 1] - lambda[k]) / g);
            }
            data.push(lambda[i - 1] / g);
        }
        Ok(CaputoMatrix {
            alpha,
            grid: grid.to_vec(),
            packed: Rc::new(PackedLower { m, data }),
        })
    }

    /// `m` equidistant points on `[a, b]`, endpoints included.
    pub fn equidistant(alpha: f64, a: f64, b: f64, m: usize) -> Result<Self, FractionalError> {
        Self::new(alpha, &equidistant_grid(a, b, m))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Entry `(i, j)`; zero above the diagonal.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.packed.row(i)[j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.packed.row(i)
    }

    /// `D xi`, differentiable through `xi` when `T` is a tape or jet type.
    pub fn apply<T: Real>(&self, xi: &[T]) -> Result<Vec<T>, FractionalError> {
        if xi.len() != self.len() {
            return Err(FractionalError::LengthMismatch {
                expected: self.len(),
                got: xi.len(),
            });
        }
        let op: Rc<dyn LinearMap> = self.packed.clone();
        Ok(T::linear_map(&op, xi))
    }

    /// Dense CSV, one matrix row per line.
    pub fn to_csv(&self) -> String {
        let m = self.len();
        let mut out = String::with_capacity(m * m * 8);
        for i in 0..m {
            for j in 0..m {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{:e}", self.entry(i, j)).expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FractionalError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn build_caputo_matrix(alpha: f64, grid: &[f64]) -> Result<CaputoMatrix, FractionalError> {
    CaputoMatrix::new(alpha, grid)
}

pub fn equidistant_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![a];
    }
    let h = (b - a) / (m - 1) as f64;
    (0..m).map(|i| if i + 1 == m { b } else { a + i as f64 * h }).collect()
}

/// `D^alpha t^p = Gamma(p+1) / Gamma(p+1-alpha) t^(p-alpha)` for `p > 0`.
pub fn caputo_monomial(alpha: f64, p: f64, t: f64) -> f64 {
    let c = statrs::function::gamma::gamma(p + 1.0) / statrs::function::gamma::gamma(p + 1.0 - alpha);
    c * t.powf(p - alpha)
}
