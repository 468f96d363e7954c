//! Differentiable computation engine.
//!
//! Three scalar types implement [`Real`]: `f64` for plain evaluation,
//! [`Var`] for reverse-mode parameter gradients recorded on a [`Tape`], and
//! [`Jet`] for forward-mode first and second derivatives with respect to
//! inputs. Jets built over `Var` give parameter gradients of input
//! derivatives, which is what physics residuals need.

mod expr;
mod jet;
mod params;
mod real;
mod tape;

pub use expr::Expr;
pub use jet::Jet;
pub use params::ParameterStore;
pub use real::{Basis1d, Elem, LinearMap, Lift, Real};
pub use tape::{Gradient, Tape, Var};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("graph references {kind} {index}, but only {available} are declared")]
    UnknownReference {
        kind: &'static str,
        index: usize,
        available: usize,
    },
    #[error("input index {index} out of range for {len} inputs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("parameter slice '{0}' already exists")]
    DuplicateSlice(String),
}

/// A scalar-valued computation of inputs and parameters that can be run on any
/// [`Real`] scalar type.
pub trait Computation {
    fn num_inputs(&self) -> usize;
    fn num_params(&self) -> usize;
    fn eval<T: Real>(&self, inputs: &[T], params: &[T]) -> T;
}

/// Leaf of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraphLeaf {
    Input(usize),
    Param(usize),
}

/// Expression over declared inputs and parameters. References are checked
/// when the graph is built.
#[derive(Clone, Debug)]
pub struct Graph {
    expr: Expr<GraphLeaf>,
    inputs: usize,
    params: usize,
}

impl Graph {
    pub fn new(expr: Expr<GraphLeaf>, inputs: usize, params: usize) -> Result<Self, AutodiffError> {
        let mut err = None;
        expr.visit_leaves(&mut |l| {
            let (kind, index, available) = match *l {
                GraphLeaf::Input(i) => ("input", i, inputs),
                GraphLeaf::Param(i) => ("parameter", i, params),
            };
            if index >= available && err.is_none() {
                err = Some(AutodiffError::UnknownReference {
                    kind,
                    index,
                    available,
                });
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(Graph {
                expr,
                inputs,
                params,
            }),
        }
    }
}

impl Computation for Graph {
    fn num_inputs(&self) -> usize {
        self.inputs
    }
    fn num_params(&self) -> usize {
        self.params
    }
    fn eval<T: Real>(&self, inputs: &[T], params: &[T]) -> T {
        self.expr.eval(&mut |l| match *l {
            GraphLeaf::Input(i) => inputs[i],
            GraphLeaf::Param(i) => params[i],
        })
    }
}

fn check_lengths<C: Computation>(c: &C, x: &[f64], p: &[f64]) -> Result<(), AutodiffError> {
    if x.len() != c.num_inputs() {
        return Err(AutodiffError::LengthMismatch {
            what: "inputs",
            expected: c.num_inputs(),
            got: x.len(),
        });
    }
    if p.len() != c.num_params() {
        return Err(AutodiffError::LengthMismatch {
            what: "params",
            expected: c.num_params(),
            got: p.len(),
        });
    }
    Ok(())
}

pub fn evaluate<C: Computation>(c: &C, inputs: &[f64], params: &[f64]) -> Result<f64, AutodiffError> {
    check_lengths(c, inputs, params)?;
    Ok(c.eval(inputs, params))
}

/// Partial derivatives of a computation's output.
#[derive(Clone, Debug, PartialEq)]
pub struct Partials {
    pub value: f64,
    pub inputs: Vec<f64>,
    pub params: Vec<f64>,
}

/// Exact gradient with respect to every input and every parameter.
pub fn gradient<C: Computation>(c: &C, inputs: &[f64], params: &[f64]) -> Result<Partials, AutodiffError> {
    check_lengths(c, inputs, params)?;
    let tape = Tape::new();
    let x = tape.vars(inputs);
    let p = tape.vars(params);
    let out = c.eval(&x, &p);
    let g = tape.gradient(out);
    Ok(Partials {
        value: out.value(),
        inputs: g.wrt_all(&x),
        params: g.wrt_all(&p),
    })
}

/// Exact `d^2 f / dx_i dx_j` through a two-direction jet.
pub fn second_derivative<C: Computation>(
    c: &C,
    inputs: &[f64],
    params: &[f64],
    i: usize,
    j: usize,
) -> Result<f64, AutodiffError> {
    check_lengths(c, inputs, params)?;
    for idx in [i, j] {
        if idx >= inputs.len() {
            return Err(AutodiffError::IndexOutOfRange {
                index: idx,
                len: inputs.len(),
            });
        }
    }
    let x: Vec<Jet<f64, 2>> = inputs
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut jet = Jet::constant(v);
            if k == i {
                jet.g[0] = 1.0;
            }
            if k == j {
                jet.g[1] = 1.0;
            }
            jet
        })
        .collect();
    let p: Vec<Jet<f64, 2>> = params.iter().map(|&v| Jet::constant(v)).collect();
    Ok(c.eval(&x, &p).h[0][1])
}

/// Random composite expression over `n_in` inputs and `n_par` parameters,
/// up to `depth` levels deep. Arguments of `ln`, `sqrt`, powers and
/// divisors are kept positive, so the result is finite for moderate inputs.
pub fn random_expr<R: Rng>(rng: &mut R, n_in: usize, n_par: usize, depth: usize) -> Expr<GraphLeaf> {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..3) {
            0 => Expr::Const(rng.random_range(-2.0..2.0)),
            1 if n_par > 0 => Expr::Leaf(GraphLeaf::Param(rng.random_range(0..n_par))),
            _ => Expr::Leaf(GraphLeaf::Input(rng.random_range(0..n_in))),
        };
    }
    let sub = |rng: &mut R| Box::new(random_expr(rng, n_in, n_par, depth - 1));
    let positive = |e: Box<Expr<GraphLeaf>>| Box::new(Expr::Add(Box::new(Expr::Const(1.0)), Box::new(Expr::Pow(e, 2.0))));
    match rng.random_range(0..13) {
        0 => Expr::Add(sub(rng), sub(rng)),
        1 => Expr::Sub(sub(rng), sub(rng)),
        2 => Expr::Mul(sub(rng), sub(rng)),
        3 => Expr::Div(sub(rng), positive(sub(rng))),
        4 => Expr::Pow(positive(sub(rng)), rng.random_range(-1.5..2.5)),
        5 => Expr::Apply(Elem::Exp, Box::new(Expr::Apply(Elem::Sin, sub(rng)))),
        6 => Expr::Apply(Elem::Ln, positive(sub(rng))),
        7 => Expr::Apply(Elem::Sin, sub(rng)),
        8 => Expr::Apply(Elem::Cos, sub(rng)),
        9 => Expr::Apply(Elem::Sqrt, positive(sub(rng))),
        10 => Expr::Apply(Elem::Sigmoid, sub(rng)),
        11 => Expr::Apply(Elem::Silu, sub(rng)),
        _ => Expr::Neg(sub(rng)),
    }
}

/// [`random_expr`] wrapped as a [`Graph`].
pub fn random_graph<R: Rng>(rng: &mut R, n_in: usize, n_par: usize, depth: usize) -> Graph {
    Graph::new(random_expr(rng, n_in, n_par, depth), n_in, n_par).expect("references are in range")
}
