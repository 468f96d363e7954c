//! Gauss-Legendre rules, tensor-product rules on boxes, and the kernel
//! matrix that turns Volterra integrals into weighted sums of network values.

use thiserror::Error;

use crate::autodiff::Real;

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order must be at least 1")]
    ZeroOrder,
    #[error("Newton iteration for root {index} of P_{order} did not converge")]
    NoConvergence { order: usize, index: usize },
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("non-finite integrand value {value} at node {index} ({point:?})")]
    NonFinite {
        index: usize,
        point: Vec<f64>,
        value: f64,
    },
    #[error("{what}: expected {expected} values, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Roots of `P_Q` by Newton's method from Chebyshev-like initial guesses,
/// weights `2 / ((1 - x^2) P_Q'(x)^2)`.
pub fn legendre_rule(order: usize) -> Result<QuadratureRule, QuadratureError> {
    if order == 0 {
        return Err(QuadratureError::ZeroOrder);
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(QuadratureError::NoConvergence { order: n, index: i });
        }
        if n % 2 == 1 && i == half - 1 {
            x = 0.0;
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes mapped affinely onto `[a, b]`: `(b - a)/2 * x + (a + b)/2`.
    pub fn mapped_nodes(&self, a: f64, b: f64) -> Vec<f64> {
        let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
        self.nodes.iter().map(|x| h * x + m).collect()
    }

    /// `integral_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let s: f64 = self
            .mapped_nodes(a, b)
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum();
        h * s
    }
}

/// Tensor product of 1D rules on a box. Nodes are stored row-major with the
/// last coordinate varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorRule {
    dim: usize,
    bounds: Vec<(f64, f64)>,
    points: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
}

impl TensorRule {
    pub fn new(rules: &[QuadratureRule], bounds: &[(f64, f64)]) -> Result<Self, QuadratureError> {
        if rules.len() != bounds.len() {
            return Err(QuadratureError::DimensionMismatch {
                what: "tensor rule bounds",
                expected: rules.len(),
                got: bounds.len(),
            });
        }
        for &(a, b) in bounds {
            if !(a < b) {
                return Err(QuadratureError::InvalidInterval(a, b));
            }
        }
        let dim = rules.len();
        let mapped: Vec<Vec<f64>> = rules
            .iter()
            .zip(bounds)
            .map(|(r, &(a, b))| r.mapped_nodes(a, b))
            .collect();
        let count: usize = rules.iter().map(|r| r.order()).product();
        let mut points = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; dim];
        for _ in 0..count {
            let mut w = 1.0;
            for d in 0..dim {
                points.push(mapped[d][idx[d]]);
                w *= rules[d].weights()[idx[d]];
            }
            weights.push(w);
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < rules[d].order() {
                    break;
                }
                idx[d] = 0;
            }
        }
        let scale = bounds.iter().map(|(a, b)| 0.5 * (b - a)).product();
        Ok(TensorRule {
            dim,
            bounds: bounds.to_vec(),
            points,
            weights,
            scale,
        })
    }

    /// Same order in every dimension.
    pub fn uniform(order: usize, bounds: &[(f64, f64)]) -> Result<Self, QuadratureError> {
        let rule = legendre_rule(order)?;
        Self::new(&vec![rule; bounds.len()], bounds)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }

    /// Products of the unmapped 1D weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `prod_d (b_d - a_d) / 2`.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// `scale * sum_j w_j L_j` over the nodes of `rule`.
pub fn integrate_cost<T: Real>(rule: &TensorRule, integrand: &[T]) -> Result<T, QuadratureError> {
    if integrand.len() != rule.len() {
        return Err(QuadratureError::DimensionMismatch {
            what: "integrand values",
            expected: rule.len(),
            got: integrand.len(),
        });
    }
    if let Some((i, v)) = integrand.iter().enumerate().find(|(_, v)| !v.value().is_finite()) {
        return Err(QuadratureError::NonFinite {
            index: i,
            point: rule.point(i).to_vec(),
            value: v.value(),
        });
    }
    Ok(T::dot_const(integrand, rule.weights()) * rule.scale())
}

/// Discretized Volterra operator `v_i = integral_{t0}^{t_i} K(t_i, s) xi(s) ds`.
///
/// For each row point `t_i` the inner rule is mapped onto `[t0, t_i]`; the
/// caller evaluates the state at [`KernelMatrix::inner_nodes`] and passes
/// those values, row by row, to [`KernelMatrix::apply`].
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    t0: f64,
    rows: Vec<f64>,
    order: usize,
    inner_nodes: Vec<f64>,
    kernel: Vec<f64>,
    row_scale: Vec<f64>,
    weights: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(
        kernel: impl Fn(f64, f64) -> f64,
        rows: &[f64],
        t0: f64,
        inner: &QuadratureRule,
    ) -> Self {
        let q = inner.order();
        let mut inner_nodes = Vec::with_capacity(rows.len() * q);
        let mut k = Vec::with_capacity(rows.len() * q);
        let mut row_scale = Vec::with_capacity(rows.len());
        for &t in rows {
            for s in inner.mapped_nodes(t0, t) {
                inner_nodes.push(s);
                k.push(kernel(t, s));
            }
            row_scale.push(0.5 * (t - t0));
        }
        KernelMatrix {
            t0,
            rows: rows.to_vec(),
            order: q,
            inner_nodes,
            kernel: k,
            row_scale,
            weights: inner.weights().to_vec(),
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Mapped integration nodes, `order()` per row.
    pub fn inner_nodes(&self) -> &[f64] {
        &self.inner_nodes
    }

    pub fn kernel_values(&self) -> &[f64] {
        &self.kernel
    }

    /// `(t_i - t0)/2 * sum_j K_ij xi_ij w_j` for every row.
    pub fn apply<T: Real>(&self, state: &[T]) -> Result<Vec<T>, QuadratureError> {
        let q = self.order;
        if state.len() != self.rows.len() * q {
            return Err(QuadratureError::DimensionMismatch {
                what: "state values on kernel nodes",
                expected: self.rows.len() * q,
                got: state.len(),
            });
        }
        let mut coeff = vec![0.0; q];
        Ok(state
            .chunks(q)
            .enumerate()
            .map(|(i, xi)| {
                for j in 0..q {
                    coeff[j] = self.row_scale[i] * self.kernel[i * q + j] * self.weights[j];
                }
                T::dot_const(xi, &coeff)
            })
            .collect())
    }
}

/// One-shot form of [`KernelMatrix::apply`]. `state_on_nodes` holds the state
/// at the inner nodes of each row, in the order of [`KernelMatrix::inner_nodes`].
pub fn volterra_apply<T: Real>(
    kernel: impl Fn(f64, f64) -> f64,
    rows: &[f64],
    t0: f64,
    inner: &QuadratureRule,
    state_on_nodes: &[T],
) -> Result<Vec<T>, QuadratureError> {
    KernelMatrix::new(kernel, rows, t0, inner).apply(state_on_nodes)
}
