use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

use super::real::{Basis1d, Elem, LinearMap, Lift, Real};

/// Truncated second-order Taylor jet in `N` input directions.
///
/// `g[i]` holds the first partial along direction `i` and `h[i][j]` the
/// second partial. `order` (0, 1 or 2) says how much of that is tracked;
/// binary operations keep the smaller order of their operands, constants
/// carry order 2. Built over [`super::Var`] this is forward-over-reverse:
/// input derivatives propagate forward, parameter gradients flow backward
/// through the tape.
#[derive(Clone, Copy)]
pub struct Jet<T, const N: usize> {
    pub v: T,
    pub g: [T; N],
    pub h: [[T; N]; N],
    order: u8,
}

impl<T: Real, const N: usize> fmt::Debug for Jet<T, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("v", &self.v)
            .field("g", &self.g)
            .field("h", &self.h)
            .field("order", &self.order)
            .finish()
    }
}

impl<T: Real, const N: usize> Jet<T, N> {
    pub fn constant(v: T) -> Self {
        let z = T::cst(0.0);
        Jet {
            v,
            g: [z; N],
            h: [[z; N]; N],
            order: 2,
        }
    }

    /// Independent coordinate: value `v`, derivative `scale` along direction `dir`.
    pub fn coordinate(v: T, dir: usize, scale: f64, order: u8) -> Self {
        let mut j = Self::constant(v);
        j.order = order.min(2);
        if order >= 1 {
            j.g[dir] = T::cst(scale);
        }
        j
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn with_order(mut self, order: u8) -> Self {
        self.order = self.order.min(order);
        self
    }

    /// Chain rule for `f(self)` where `f(x, k)` returns the `k`-th derivative.
    #[inline]
    pub fn chain(self, f: impl Fn(T, usize) -> T) -> Self {
        let mut out = Self::constant(f(self.v, 0));
        out.order = self.order;
        if self.order == 0 {
            return out;
        }
        let d1 = f(self.v, 1);
        for i in 0..N {
            out.g[i] = d1 * self.g[i];
        }
        if self.order >= 2 {
            let d2 = f(self.v, 2);
            for i in 0..N {
                for j in i..N {
                    let hij = d2 * self.g[i] * self.g[j] + d1 * self.h[i][j];
                    out.h[i][j] = hij;
                    out.h[j][i] = hij;
                }
            }
        }
        out
    }

    fn zip(self, rhs: Self, f: impl Fn(T, T) -> T) -> Self {
        let order = self.order.min(rhs.order);
        let mut out = Self::constant(f(self.v, rhs.v));
        out.order = order;
        if order >= 1 {
            for i in 0..N {
                out.g[i] = f(self.g[i], rhs.g[i]);
            }
        }
        if order >= 2 {
            for i in 0..N {
                for j in i..N {
                    let hij = f(self.h[i][j], rhs.h[i][j]);
                    out.h[i][j] = hij;
                    out.h[j][i] = hij;
                }
            }
        }
        out
    }

    fn map(self, f: impl Fn(T) -> T) -> Self {
        let mut out = Self::constant(f(self.v));
        out.order = self.order;
        if self.order >= 1 {
            for i in 0..N {
                out.g[i] = f(self.g[i]);
            }
        }
        if self.order >= 2 {
            for i in 0..N {
                for j in i..N {
                    let hij = f(self.h[i][j]);
                    out.h[i][j] = hij;
                    out.h[j][i] = hij;
                }
            }
        }
        out
    }

    fn components(order: u8) -> usize {
        match order {
            0 => 1,
            1 => 1 + N,
            _ => 1 + N + N * (N + 1) / 2,
        }
    }

    fn component(&self, c: usize) -> T {
        if c == 0 {
            return self.v;
        }
        if c <= N {
            return self.g[c - 1];
        }
        let mut c = c - 1 - N;
        for i in 0..N {
            if c < N - i {
                return self.h[i][i + c];
            }
            c -= N - i;
        }
        unreachable!()
    }

    fn set_component(&mut self, c: usize, val: T) {
        if c == 0 {
            self.v = val;
            return;
        }
        if c <= N {
            self.g[c - 1] = val;
            return;
        }
        let mut c = c - 1 - N;
        for i in 0..N {
            if c < N - i {
                self.h[i][i + c] = val;
                self.h[i + c][i] = val;
                return;
            }
            c -= N - i;
        }
    }
}

impl<T: Real, const N: usize> Add for Jet<T, N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<T: Real, const N: usize> Sub for Jet<T, N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<T: Real, const N: usize> Mul for Jet<T, N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let order = self.order.min(rhs.order);
        let mut out = Self::constant(self.v * rhs.v);
        out.order = order;
        if order >= 1 {
            for i in 0..N {
                out.g[i] = self.g[i] * rhs.v + self.v * rhs.g[i];
            }
        }
        if order >= 2 {
            for i in 0..N {
                for j in i..N {
                    let hij = self.h[i][j] * rhs.v
                        + self.g[i] * rhs.g[j]
                        + self.g[j] * rhs.g[i]
                        + self.v * rhs.h[i][j];
                    out.h[i][j] = hij;
                    out.h[j][i] = hij;
                }
            }
        }
        out
    }
}

impl<T: Real, const N: usize> Div for Jet<T, N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self * rhs.elem(Elem::Powf(-1.0))
    }
}

impl<T: Real, const N: usize> Neg for Jet<T, N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|a| -a)
    }
}

impl<T: Real, const N: usize> Add<f64> for Jet<T, N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v = self.v + rhs;
        self
    }
}

impl<T: Real, const N: usize> Sub<f64> for Jet<T, N> {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.v = self.v - rhs;
        self
    }
}

impl<T: Real, const N: usize> Mul<f64> for Jet<T, N> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.map(|a| a * rhs)
    }
}

impl<T: Real, const N: usize> Div<f64> for Jet<T, N> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.map(|a| a / rhs)
    }
}

impl<T: Real, const N: usize> Real for Jet<T, N> {
    fn cst(c: f64) -> Self {
        Self::constant(T::cst(c))
    }

    fn value(&self) -> f64 {
        self.v.value()
    }

    fn elem_d(self, f: Elem, k: usize) -> Self {
        self.chain(|x, j| x.elem_d(f, k + j))
    }

    fn linear_map(op: &Rc<dyn LinearMap>, x: &[Self]) -> Vec<Self> {
        let order = x.iter().map(|j| j.order).min().unwrap_or(2);
        let mut out = vec![Self::constant(T::cst(0.0)); op.rows()];
        for o in out.iter_mut() {
            o.order = order;
        }
        for c in 0..Self::components(order) {
            let col: Vec<T> = x.iter().map(|j| j.component(c)).collect();
            for (o, val) in out.iter_mut().zip(T::linear_map(op, &col)) {
                o.set_component(c, val);
            }
        }
        out
    }
}

impl<P: Real, T: Lift<P>, const N: usize> Lift<P> for Jet<T, N> {
    fn lift(p: P) -> Self {
        Self::constant(T::lift(p))
    }

    fn combine<B: Basis1d + ?Sized>(basis: &B, coeffs: &[P], x: Self, k: usize) -> Self {
        x.chain(|xv, j| T::combine(basis, coeffs, xv, k + j))
    }
}
