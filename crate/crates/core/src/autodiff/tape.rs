use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

use super::real::{Basis1d, Elem, LinearMap, Lift, Real, MAX_SUPPORT};

const CONST: u32 = u32::MAX;

struct Block {
    out_start: u32,
    out_len: u32,
    inputs: Vec<u32>,
    op: Rc<dyn LinearMap>,
}

#[derive(Default)]
struct TapeData {
    // edges of node i live in parents/weights[starts[i]..starts[i + 1]]
    starts: Vec<u32>,
    parents: Vec<u32>,
    weights: Vec<f64>,
    blocks: Vec<Block>,
}

impl TapeData {
    #[inline]
    fn close_node(&mut self) -> u32 {
        let idx = self.starts.len() as u32 - 1;
        self.starts.push(self.parents.len() as u32);
        idx
    }
}

/// Reverse-mode tape. Nodes store their parents together with the local
/// partial derivative, so the backward sweep is a single weighted scatter.
pub struct Tape {
    data: RefCell<TapeData>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tape({} nodes)", self.len())
    }
}

impl Tape {
    pub fn new() -> Self {
        let data = TapeData {
            starts: vec![0],
            ..Default::default()
        };
        Tape {
            data: RefCell::new(data),
        }
    }

    /// Drops all nodes but keeps the allocations for the next evaluation.
    pub fn clear(&mut self) {
        let d = self.data.get_mut();
        d.starts.clear();
        d.starts.push(0);
        d.parents.clear();
        d.weights.clear();
        d.blocks.clear();
    }

    pub fn len(&self) -> usize {
        self.data.borrow().starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.data.borrow_mut().close_node();
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    #[inline]
    fn push1(&self, p: u32, w: f64, val: f64) -> Var<'_> {
        let mut d = self.data.borrow_mut();
        d.parents.push(p);
        d.weights.push(w);
        let idx = d.close_node();
        Var {
            tape: Some(self),
            idx,
            val,
        }
    }

    #[inline]
    fn push2(&self, p1: u32, w1: f64, p2: u32, w2: f64, val: f64) -> Var<'_> {
        let mut d = self.data.borrow_mut();
        d.parents.push(p1);
        d.weights.push(w1);
        d.parents.push(p2);
        d.weights.push(w2);
        let idx = d.close_node();
        Var {
            tape: Some(self),
            idx,
            val,
        }
    }

    /// Pushes a node with arbitrary parents. Constant parents are skipped.
    pub fn push_node<'t>(&'t self, edges: &[(Var<'t>, f64)], val: f64) -> Var<'t> {
        let mut d = self.data.borrow_mut();
        for (v, w) in edges {
            if v.idx != CONST {
                d.parents.push(v.idx);
                d.weights.push(*w);
            }
        }
        let idx = d.close_node();
        Var {
            tape: Some(self),
            idx,
            val,
        }
    }

    /// Reverse sweep from `output`; returns adjoints of every node.
    pub fn gradient(&self, output: Var<'_>) -> Gradient {
        let d = self.data.borrow();
        let n = d.starts.len() - 1;
        let mut adj = vec![0.0; n];
        if output.idx == CONST {
            return Gradient { adj };
        }
        adj[output.idx as usize] = 1.0;
        let mut block_pos = d.blocks.len();
        let mut scratch = Vec::new();
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a != 0.0 {
                let (s, e) = (d.starts[i] as usize, d.starts[i + 1] as usize);
                for k in s..e {
                    adj[d.parents[k] as usize] += a * d.weights[k];
                }
            }
            while block_pos > 0 && d.blocks[block_pos - 1].out_start as usize > i {
                block_pos -= 1;
            }
            if block_pos > 0 && d.blocks[block_pos - 1].out_start as usize == i {
                let b = &d.blocks[block_pos - 1];
                let y = &adj[i..i + b.out_len as usize];
                if y.iter().any(|v| *v != 0.0) {
                    scratch.clear();
                    scratch.resize(b.inputs.len(), 0.0);
                    b.op.apply_transpose_add(y, &mut scratch);
                    for (inp, g) in b.inputs.iter().zip(&scratch) {
                        if *inp != CONST {
                            adj[*inp as usize] += g;
                        }
                    }
                }
                block_pos -= 1;
            }
        }
        Gradient { adj }
    }
}

/// Adjoints produced by [`Tape::gradient`].
#[derive(Clone, Debug)]
pub struct Gradient {
    adj: Vec<f64>,
}

impl Gradient {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        if v.idx == CONST {
            0.0
        } else {
            self.adj[v.idx as usize]
        }
    }

    pub fn wrt_all(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|v| self.wrt(*v)).collect()
    }
}

/// A scalar recorded on a [`Tape`], or a constant that is not recorded at all.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.idx == CONST {
            write!(f, "Var(const {})", self.val)
        } else {
            write!(f, "Var(#{} = {})", self.idx, self.val)
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Var {
            tape: None,
            idx: CONST,
            val,
        }
    }

    pub fn is_const(&self) -> bool {
        self.idx == CONST
    }

    #[inline]
    fn unary(self, val: f64, partial: f64) -> Self {
        match self.tape {
            Some(t) if self.idx != CONST => t.push1(self.idx, partial, val),
            _ => Var::constant(val),
        }
    }

    #[inline]
    fn binary(a: Self, b: Self, val: f64, pa: f64, pb: f64) -> Self {
        match (a.idx == CONST, b.idx == CONST) {
            (true, true) => Var::constant(val),
            (false, true) => a.unary(val, pa),
            (true, false) => b.unary(val, pb),
            (false, false) => {
                let t = a.tape.expect("non-constant var without tape");
                debug_assert!(std::ptr::eq(t, b.tape.unwrap()), "vars from different tapes");
                t.push2(a.idx, pa, b.idx, pb, val)
            }
        }
    }

    #[inline]
    fn is_exact(&self, c: f64) -> bool {
        self.idx == CONST && self.val == c
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        if self.is_exact(0.0) {
            return rhs;
        }
        if rhs.is_exact(0.0) {
            return self;
        }
        Var::binary(self, rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        if rhs.is_exact(0.0) {
            return self;
        }
        Var::binary(self, rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        if self.is_exact(0.0) || rhs.is_exact(0.0) {
            return Var::constant(0.0);
        }
        if self.is_exact(1.0) {
            return rhs;
        }
        if rhs.is_exact(1.0) {
            return self;
        }
        Var::binary(self, rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        if self.is_exact(0.0) {
            return Var::constant(0.0);
        }
        let inv = 1.0 / rhs.val;
        let val = self.val * inv;
        Var::binary(self, rhs, val, inv, -val * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        if rhs == 0.0 {
            return self;
        }
        self.unary(self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        if rhs == 0.0 {
            return self;
        }
        self.unary(self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        if rhs == 0.0 {
            return Var::constant(0.0);
        }
        if rhs == 1.0 {
            return self;
        }
        self.unary(self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.unary(self.val / rhs, 1.0 / rhs)
    }
}

impl<'t> Real for Var<'t> {
    #[inline]
    fn cst(c: f64) -> Self {
        Var::constant(c)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.val
    }
    #[inline]
    fn elem_d(self, f: Elem, k: usize) -> Self {
        let val = f.deriv(self.val, k);
        if self.idx == CONST {
            return Var::constant(val);
        }
        self.unary(val, f.deriv(self.val, k + 1))
    }

    fn dot_const(xs: &[Self], ws: &[f64]) -> Self {
        let val: f64 = xs.iter().zip(ws).map(|(x, w)| x.val * w).sum();
        let tape = match xs.iter().find(|v| v.idx != CONST) {
            Some(v) => v.tape.unwrap(),
            None => return Var::constant(val),
        };
        let mut d = tape.data.borrow_mut();
        for (x, w) in xs.iter().zip(ws) {
            if x.idx != CONST && *w != 0.0 {
                d.parents.push(x.idx);
                d.weights.push(*w);
            }
        }
        let idx = d.close_node();
        Var {
            tape: Some(tape),
            idx,
            val,
        }
    }

    fn linear_map(op: &Rc<dyn LinearMap>, x: &[Self]) -> Vec<Self> {
        let xv: Vec<f64> = x.iter().map(|v| v.val).collect();
        let mut y = vec![0.0; op.rows()];
        op.apply(&xv, &mut y);
        let tape = x.iter().find_map(|v| if v.idx != CONST { v.tape } else { None });
        let Some(tape) = tape else {
            return y.into_iter().map(Var::constant).collect();
        };
        if y.is_empty() {
            return Vec::new();
        }
        let mut d = tape.data.borrow_mut();
        let out_start = (d.starts.len() - 1) as u32;
        let mut out = Vec::with_capacity(y.len());
        for val in y {
            let idx = d.close_node();
            out.push(Var {
                tape: Some(tape),
                idx,
                val,
            });
        }
        d.blocks.push(Block {
            out_start,
            out_len: out.len() as u32,
            inputs: x.iter().map(|v| v.idx).collect(),
            op: Rc::clone(op),
        });
        out
    }
}

impl<'t> Lift<Var<'t>> for Var<'t> {
    #[inline]
    fn lift(p: Var<'t>) -> Self {
        p
    }

    fn combine<B: Basis1d + ?Sized>(basis: &B, coeffs: &[Var<'t>], x: Self, k: usize) -> Self {
        let n = basis.support();
        let mut b = [0.0; MAX_SUPPORT];
        let mut db = [0.0; MAX_SUPPORT];
        let first = basis.eval_derivative(x.val, k, &mut b[..n]);
        let cs = &coeffs[first..first + n];
        let val: f64 = cs.iter().zip(&b[..n]).map(|(c, w)| c.val * w).sum();
        let tape = match cs.iter().chain(std::iter::once(&x)).find(|v| v.idx != CONST) {
            Some(v) => v.tape.unwrap(),
            None => return Var::constant(val),
        };
        let mut d = tape.data.borrow_mut();
        for (c, w) in cs.iter().zip(&b[..n]) {
            if c.idx != CONST && *w != 0.0 {
                d.parents.push(c.idx);
                d.weights.push(*w);
            }
        }
        if x.idx != CONST {
            let first1 = basis.eval_derivative(x.val, k + 1, &mut db[..n]);
            debug_assert_eq!(first, first1);
            let dx: f64 = cs.iter().zip(&db[..n]).map(|(c, w)| c.val * w).sum();
            d.parents.push(x.idx);
            d.weights.push(dx);
        }
        let idx = d.close_node();
        Var {
            tape: Some(tape),
            idx,
            val,
        }
    }
}

impl<'t> Lift<f64> for Var<'t> {
    #[inline]
    fn lift(p: f64) -> Self {
        Var::constant(p)
    }

    fn combine<B: Basis1d + ?Sized>(basis: &B, coeffs: &[f64], x: Self, k: usize) -> Self {
        let val = <f64 as Lift<f64>>::combine(basis, coeffs, x.val, k);
        if x.idx == CONST {
            return Var::constant(val);
        }
        let dx = <f64 as Lift<f64>>::combine(basis, coeffs, x.val, k + 1);
        x.unary(val, dx)
    }
}
