use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

/// Elementary univariate functions known to the engine.
///
/// Every variant knows its own derivatives of arbitrary order (up to
/// [`Elem::MAX_ORDER`]), which is what lets jets and tape nodes share one
/// chain-rule implementation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elem {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Sigmoid,
    Silu,
    Tanh,
    Powf(f64),
}

impl Elem {
    pub const MAX_ORDER: usize = 5;

    pub fn name(self) -> &'static str {
        match self {
            Elem::Exp => "exp",
            Elem::Ln => "ln",
            Elem::Sin => "sin",
            Elem::Cos => "cos",
            Elem::Sqrt => "sqrt",
            Elem::Sigmoid => "sigmoid",
            Elem::Silu => "silu",
            Elem::Tanh => "tanh",
            Elem::Powf(_) => "pow",
        }
    }

    /// `k`-th derivative of the function at `x`.
    pub fn deriv(self, x: f64, k: usize) -> f64 {
        match self {
            Elem::Exp => x.exp(),
            Elem::Ln => {
                if k == 0 {
                    x.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * factorial(k - 1) / x.powi(k as i32)
                }
            }
            Elem::Sin => match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            Elem::Cos => match k % 4 {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            },
            Elem::Sqrt => {
                if k == 0 {
                    x.sqrt()
                } else {
                    falling(0.5, k) * x.powf(0.5 - k as f64)
                }
            }
            Elem::Powf(p) => {
                if k == 0 {
                    x.powf(p)
                } else {
                    let c = falling(p, k);
                    if c == 0.0 {
                        0.0
                    } else {
                        c * x.powf(p - k as f64)
                    }
                }
            }
            Elem::Sigmoid => sigmoid_deriv(x, k),
            Elem::Silu => {
                if k == 0 {
                    x * sigmoid(x)
                } else {
                    x * sigmoid_deriv(x, k) + k as f64 * sigmoid_deriv(x, k - 1)
                }
            }
            Elem::Tanh => {
                if k == 0 {
                    x.tanh()
                } else {
                    2f64.powi(k as i32 + 1) * sigmoid_deriv(2.0 * x, k)
                }
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// p (p-1) ... (p-k+1)
fn falling(p: f64, k: usize) -> f64 {
    (0..k).map(|i| p - i as f64).product()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_deriv(x: f64, k: usize) -> f64 {
    let s = sigmoid(x);
    let base = s * (1.0 - s);
    match k {
        0 => s,
        1 => base,
        2 => base * (1.0 - 2.0 * s),
        3 => base * (1.0 - 6.0 * s + 6.0 * s * s),
        4 => base * (1.0 - 14.0 * s + 36.0 * s * s - 24.0 * s * s * s),
        5 => {
            base * (1.0 - 30.0 * s + 150.0 * s * s - 240.0 * s * s * s
                + 120.0 * s * s * s * s)
        }
        _ => panic!("sigmoid derivative of order {k} is not supported"),
    }
}

/// A linear operator on flat vectors, usable as a single block on the tape.
pub trait LinearMap {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `x += A^T y`
    fn apply_transpose_add(&self, y: &[f64], x: &mut [f64]);
}

/// A set of univariate basis functions with local support, such as B-splines.
pub trait Basis1d {
    /// Upper bound on the number of basis functions nonzero at one point.
    fn support(&self) -> usize;
    /// Writes the `order`-th derivatives of the active basis functions at `x`
    /// into `out[..support()]` and returns the global index of `out[0]`.
    fn eval_derivative(&self, x: f64, order: usize, out: &mut [f64]) -> usize;
}

pub(crate) const MAX_SUPPORT: usize = 16;

/// Scalar types the engine can compute with: plain `f64`, tape variables and
/// jets built on either.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(c: f64) -> Self;
    fn value(&self) -> f64;
    /// `k`-th derivative of `f`, evaluated at `self`.
    fn elem_d(self, f: Elem, k: usize) -> Self;
    /// Applies a linear operator to a vector of values.
    fn linear_map(op: &Rc<dyn LinearMap>, x: &[Self]) -> Vec<Self>;

    /// `sum_i ws[i] * xs[i]` with constant weights.
    fn dot_const(xs: &[Self], ws: &[f64]) -> Self {
        xs.iter()
            .zip(ws)
            .fold(Self::cst(0.0), |acc, (x, w)| acc + *x * *w)
    }

    fn elem(self, f: Elem) -> Self {
        self.elem_d(f, 0)
    }
    fn exp(self) -> Self {
        self.elem(Elem::Exp)
    }
    fn ln(self) -> Self {
        self.elem(Elem::Ln)
    }
    fn sin(self) -> Self {
        self.elem(Elem::Sin)
    }
    fn cos(self) -> Self {
        self.elem(Elem::Cos)
    }
    fn sqrt(self) -> Self {
        self.elem(Elem::Sqrt)
    }
    fn sigmoid(self) -> Self {
        self.elem(Elem::Sigmoid)
    }
    fn silu(self) -> Self {
        self.elem(Elem::Silu)
    }
    fn tanh(self) -> Self {
        self.elem(Elem::Tanh)
    }
    fn powf(self, p: f64) -> Self {
        if p == 1.0 {
            self
        } else if p == 2.0 {
            self * self
        } else {
            self.elem(Elem::Powf(p))
        }
    }
    fn square(self) -> Self {
        self * self
    }
}

/// Scalars that can absorb parameters of type `P`, so one network definition
/// serves plain evaluation, parameter gradients and input jets.
pub trait Lift<P: Real>: Real {
    fn lift(p: P) -> Self;
    /// `k`-th derivative in `x` of `sum_i coeffs[i] * B_i(x)`.
    fn combine<B: Basis1d + ?Sized>(basis: &B, coeffs: &[P], x: Self, k: usize) -> Self;
}

impl Real for f64 {
    #[inline]
    fn cst(c: f64) -> Self {
        c
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn elem_d(self, f: Elem, k: usize) -> Self {
        f.deriv(self, k)
    }
    fn linear_map(op: &Rc<dyn LinearMap>, x: &[Self]) -> Vec<Self> {
        let mut y = vec![0.0; op.rows()];
        op.apply(x, &mut y);
        y
    }
}

impl Lift<f64> for f64 {
    #[inline]
    fn lift(p: f64) -> Self {
        p
    }
    fn combine<B: Basis1d + ?Sized>(basis: &B, coeffs: &[f64], x: f64, k: usize) -> f64 {
        let mut buf = [0.0; MAX_SUPPORT];
        let n = basis.support();
        let first = basis.eval_derivative(x, k, &mut buf[..n]);
        buf[..n]
            .iter()
            .zip(&coeffs[first..first + n])
            .map(|(b, c)| b * c)
            .sum()
    }
}
