//! Declarative optimal control problems: cost, dynamics, conditions,
//! observations and trainable scalars, plus the five reference problems.

mod builtin;
mod config;
pub mod parse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::autodiff::{Expr, Jet};
use crate::fractional::{CaputoMatrix, FractionalError};
use crate::quadrature::{legendre_rule, KernelMatrix, QuadratureError};

pub use builtin::{builtin_problem, builtin_source, BUILTIN_IDS};
pub use config::ProblemConfig;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("parse error in '{expr}' at offset {pos}: {msg}")]
    Parse { expr: String, pos: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("unknown problem '{0}' (expected one of frac_forward, frac_inverse, ide, pde2d, heat2d)")]
    Unknown(String),
    #[error("problem '{0}' has no exact solution for field '{1}'")]
    NoExact(String, String),
    #[error(transparent)]
    Fractional(#[from] FractionalError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which derivative of a field a leaf refers to. Axes index `coords`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Deriv {
    Value,
    First(usize),
    Second(usize, usize),
}

impl Deriv {
    pub fn order(self) -> u8 {
        match self {
            Deriv::Value => 0,
            Deriv::First(_) => 1,
            Deriv::Second(..) => 2,
        }
    }

    /// Reads this component off a jet.
    pub fn pick<T: crate::autodiff::Real, const N: usize>(self, j: &Jet<T, N>) -> T {
        match self {
            Deriv::Value => j.v,
            Deriv::First(i) => j.g[i],
            Deriv::Second(i, k) => j.h[i][k],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Leaf {
    Coord(usize),
    Field { field: usize, deriv: Deriv },
    /// Caputo derivative in the (single) time coordinate.
    Caputo { field: usize, alpha: f64 },
    /// Index into [`ControlProblem::volterra`].
    Volterra(usize),
    /// Integration variable of a Volterra kernel.
    Iota,
    Scalar(usize),
}

pub type ProblemExpr = Expr<Leaf>;

/// `integral_{t0}^{t} kernel(t, iota) field(iota) d iota`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolterraTerm {
    pub kernel: ProblemExpr,
    pub field: usize,
}

impl VolterraTerm {
    pub fn kernel_fn(&self) -> impl Fn(f64, f64) -> f64 + '_ {
        move |t, s| {
            self.kernel.eval(&mut |l: &Leaf| match l {
                Leaf::Iota => s,
                _ => t,
            })
        }
    }
}

/// Dynamics residual `lhs - rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub lhs: ProblemExpr,
    pub rhs: ProblemExpr,
}

impl Residual {
    pub fn expr(&self) -> ProblemExpr {
        Expr::Sub(Box::new(self.lhs.clone()), Box::new(self.rhs.clone()))
    }
}

/// `field = target` on the face `coords[axis] = lower/upper bound`. In one
/// dimension the face is a single point.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub field: usize,
    pub axis: usize,
    pub upper: bool,
    pub target: ProblemExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub point: Vec<f64>,
    pub field: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainableScalar {
    pub name: String,
    pub init: f64,
    pub exact: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub cost: f64,
    pub residual: f64,
    pub boundary: f64,
    pub observation: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            cost: 1.0,
            residual: 1.0,
            boundary: 1.0,
            observation: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    /// Gauss nodes per dimension for the cost and non-fractional residuals.
    pub quad_order: usize,
    /// Caputo grid size.
    pub frac_grid: usize,
    /// Inner nodes per row of a Volterra term.
    pub volterra_order: usize,
    pub max_iters: usize,
    /// Curvature pairs kept by L-BFGS.
    pub lbfgs_memory: usize,
    pub weights: Weights,
}

impl Settings {
    pub fn for_dim(dim: usize) -> Self {
        Settings {
            quad_order: match dim {
                1 => 30,
                2 => 25,
                _ => 10,
            },
            frac_grid: 2000,
            volterra_order: 20,
            max_iters: 2000,
            lbfgs_memory: 100,
            weights: Weights::default(),
        }
    }
}

/// Box and resolution of the evaluation grid used for error metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalGrid {
    pub bounds: Vec<(f64, f64)>,
    pub points: Vec<usize>,
}

impl EvalGrid {
    /// Equidistant points, endpoints included, last coordinate fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .zip(&self.points)
            .map(|(&(a, b), &n)| crate::fractional::equidistant_grid(a, b, n))
            .collect();
        tensor_points(&axes)
    }
}

/// Cartesian product of per-axis points, last axis fastest.
pub fn tensor_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

/// A complete problem instance. Field 0 is the control, fields `1..` are
/// states. Coordinates are ordered spatial first, time last.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlProblem {
    pub name: String,
    pub coords: Vec<String>,
    pub domain: Vec<(f64, f64)>,
    pub fields: Vec<String>,
    pub cost: ProblemExpr,
    pub terminal_cost: Option<ProblemExpr>,
    pub residuals: Vec<Residual>,
    pub volterra: Vec<VolterraTerm>,
    pub conditions: Vec<Condition>,
    pub observations: Vec<Observation>,
    pub scalars: Vec<TrainableScalar>,
    pub exact: Vec<Option<ProblemExpr>>,
    pub settings: Settings,
    pub eval: EvalGrid,
}

impl ControlProblem {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn num_states(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn time_axis(&self) -> usize {
        self.coords.len() - 1
    }

    /// Distinct Caputo orders used by the residuals, in order of appearance.
    pub fn caputo_orders(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.residuals {
            r.expr().visit_leaves(&mut |l| {
                if let Leaf::Caputo { alpha, .. } = l {
                    if !out.contains(alpha) {
                        out.push(*alpha);
                    }
                }
            });
        }
        out
    }

    pub fn is_fractional(&self) -> bool {
        !self.caputo_orders().is_empty()
    }

    /// Highest derivative order of each field across residuals and cost.
    pub fn derivative_orders(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.fields.len()];
        let mut visit = |l: &Leaf| {
            if let Leaf::Field { field, deriv } = l {
                out[*field] = out[*field].max(deriv.order());
            }
        };
        for r in &self.residuals {
            r.expr().visit_leaves(&mut visit);
        }
        self.cost.visit_leaves(&mut visit);
        out
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == name)
    }

    /// Exact value of field `f` at `x`.
    pub fn exact_value(&self, f: usize, x: &[f64]) -> Result<f64, ProblemError> {
        let e = self.exact_expr(f)?;
        Ok(e.eval(&mut |l: &Leaf| match l {
            Leaf::Coord(i) => x[*i],
            _ => f64::NAN,
        }))
    }

    fn exact_expr(&self, f: usize) -> Result<&ProblemExpr, ProblemError> {
        self.exact
            .get(f)
            .and_then(|e| e.as_ref())
            .ok_or_else(|| ProblemError::NoExact(self.name.clone(), self.fields.get(f).cloned().unwrap_or_default()))
    }

    /// Exact value and derivatives of field `f` at `x` (up to 3 coordinates).
    pub fn exact_jet(&self, f: usize, x: &[f64]) -> Result<Jet<f64, 3>, ProblemError> {
        let e = self.exact_expr(f)?;
        let coords: Vec<Jet<f64, 3>> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::coordinate(v, i, 1.0, 2))
            .collect();
        Ok(e.eval(&mut |l: &Leaf| match l {
            Leaf::Coord(i) => coords[*i],
            _ => Jet::constant(f64::NAN),
        }))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.iter().all(|e| e.is_some())
    }

    /// Checks structural invariants; builders call this before returning.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |m: String| Err(ProblemError::Invalid(m));
        let d = self.coords.len();
        if d == 0 || d > 3 {
            return bad(format!("{d} coordinates given, 1 to 3 supported"));
        }
        if self.domain.len() != d {
            return bad(format!("{} domain intervals for {d} coordinates", self.domain.len()));
        }
        if let Some((a, b)) = self.domain.iter().find(|(a, b)| !(a < b)) {
            return bad(format!("empty interval [{a}, {b}]"));
        }
        if self.fields.len() < 2 {
            return bad("need a control and at least one state".into());
        }
        for (i, n) in self.fields.iter().chain(&self.coords).enumerate() {
            if self.fields.iter().chain(&self.coords).skip(i + 1).any(|m| m == n) {
                return bad(format!("name '{n}' used twice"));
            }
        }
        let w = self.settings.weights;
        for (name, v) in [
            ("cost", w.cost),
            ("residual", w.residual),
            ("boundary", w.boundary),
            ("observation", w.observation),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("weight {name} = {v} must be finite and non-negative"));
            }
        }
        let s = &self.settings;
        if s.quad_order == 0 || s.volterra_order == 0 {
            return bad("quadrature orders must be positive".into());
        }
        if s.lbfgs_memory == 0 {
            return bad("lbfgs_memory must be positive".into());
        }
        if self.residuals.is_empty() {
            return bad("no dynamics residuals".into());
        }
        let mut err = None;
        for r in &self.residuals {
            r.expr().visit_leaves(&mut |l| match l {
                Leaf::Caputo { alpha, .. } => {
                    if !(*alpha > 0.0 && *alpha < 1.0) {
                        err = Some(format!("Caputo order {alpha} outside (0, 1)"));
                    } else if d != 1 {
                        err = Some("Caputo derivatives need a single time coordinate".into());
                    }
                }
                Leaf::Volterra(_) if d != 1 => {
                    err = Some("Volterra terms need a single time coordinate".into());
                }
                _ => {}
            });
        }
        if let Some(m) = err {
            return bad(m);
        }
        if self.is_fractional() && s.frac_grid < 2 {
            return bad("Caputo grid needs at least 2 points".into());
        }
        if self.terminal_cost.is_some() && d != 1 {
            return bad("terminal cost is only supported in one dimension".into());
        }
        for c in &self.conditions {
            if c.axis >= d || c.field >= self.fields.len() {
                return bad("condition refers to a missing axis or field".into());
            }
        }
        for o in &self.observations {
            if o.point.len() != d || o.field >= self.fields.len() {
                return bad("observation has wrong dimension or field".into());
            }
            if o.point.iter().zip(&self.domain).any(|(x, (a, b))| x < a || x > b) {
                return bad(format!("observation {:?} lies outside the domain", o.point));
            }
        }
        for (k, sc) in self.scalars.iter().enumerate() {
            let mut used = false;
            for r in &self.residuals {
                r.expr().visit_leaves(&mut |l| used |= *l == Leaf::Scalar(k));
            }
            if !used {
                return bad(format!("scalar '{}' does not appear in any residual", sc.name));
            }
        }
        if self.exact.len() != self.fields.len() {
            return bad("exact solution list does not match fields".into());
        }
        if self.eval.bounds.len() != d || self.eval.points.len() != d || self.eval.points.contains(&0) {
            return bad("evaluation grid does not match the domain".into());
        }
        Ok(())
    }

    /// Largest absolute residual of each dynamics equation when every field
    /// is replaced by its exact solution and scalars by their exact values.
    ///
    /// Integer-order residuals are checked at `n` random interior points.
    /// Fractional residuals use the Caputo grid of `settings.frac_grid`
    /// points, at `n` random grid points other than the first.
    pub fn exact_residuals(&self, n: usize, seed: u64) -> Result<Vec<f64>, ProblemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scalars: Vec<f64> = self
            .scalars
            .iter()
            .map(|s| s.exact.unwrap_or(s.init))
            .collect();
        let fractional = self.is_fractional();
        let grid = if fractional {
            let (a, b) = self.domain[0];
            crate::fractional::equidistant_grid(a, b, self.settings.frac_grid)
        } else {
            Vec::new()
        };
        let mut caputo = Vec::new();
        for alpha in self.caputo_orders() {
            let d = CaputoMatrix::new(alpha, &grid)?;
            let mut per_field = Vec::new();
            for f in 0..self.fields.len() {
                let vals = grid
                    .iter()
                    .map(|&t| self.exact_value(f, &[t]))
                    .collect::<Result<Vec<_>, _>>()?;
                per_field.push(d.apply(&vals)?);
            }
            caputo.push((alpha, per_field));
        }
        let inner = legendre_rule(self.settings.volterra_order)?;

        let mut worst = vec![0.0f64; self.residuals.len()];
        for _ in 0..n {
            let (x, grid_index) = if fractional {
                let i = rng.random_range(1..grid.len());
                (vec![grid[i]], Some(i))
            } else {
                let x: Vec<f64> = self
                    .domain
                    .iter()
                    .map(|&(a, b)| a + (b - a) * rng.random_range(0.02..0.98))
                    .collect();
                (x, None)
            };
            for (r, res) in self.residuals.iter().enumerate() {
                let mut failure = None;
                let v = res.expr().eval(&mut |l: &Leaf| -> f64 {
                    let out = match l {
                        Leaf::Coord(i) => Ok(x[*i]),
                        Leaf::Field { field, deriv } => self.exact_jet(*field, &x).map(|j| deriv.pick(&j)),
                        Leaf::Scalar(k) => Ok(scalars[*k]),
                        Leaf::Caputo { field, alpha } => {
                            let (_, per_field) = caputo.iter().find(|(a, _)| a == alpha).expect("collected");
                            Ok(per_field[*field][grid_index.expect("fractional grid")])
                        }
                        Leaf::Volterra(k) => {
                            let term = &self.volterra[*k];
                            let t0 = self.domain[0].0;
                            let m = KernelMatrix::new(term.kernel_fn(), &[x[0]], t0, &inner);
                            m.inner_nodes()
                                .iter()
                                .map(|&s| self.exact_value(term.field, &[s]))
                                .collect::<Result<Vec<_>, _>>()
                                .and_then(|vals| Ok(m.apply(&vals)?[0]))
                        }
                        Leaf::Iota => Ok(f64::NAN),
                    };
                    out.unwrap_or_else(|e| {
                        failure = Some(e);
                        f64::NAN
                    })
                });
                if let Some(e) = failure {
                    return Err(e);
                }
                worst[r] = worst[r].max(v.abs());
            }
        }
        Ok(worst)
    }

    /// Largest mismatch between each condition target and the exact solution,
    /// sampled at up to `n` points per face.
    pub fn exact_condition_errors(&self, n: usize) -> Result<Vec<f64>, ProblemError> {
        self.conditions
            .iter()
            .map(|c| {
                let axes: Vec<Vec<f64>> = self
                    .domain
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, b))| {
                        if i == c.axis {
                            vec![if c.upper { b } else { a }]
                        } else {
                            crate::fractional::equidistant_grid(a, b, n)
                        }
                    })
                    .collect();
                let mut worst = 0.0f64;
                for p in tensor_points(&axes) {
                    let target = c.target.eval(&mut |l: &Leaf| match l {
                        Leaf::Coord(i) => p[*i],
                        _ => f64::NAN,
                    });
                    worst = worst.max((self.exact_value(c.field, &p)? - target).abs());
                }
                Ok(worst)
            })
            .collect()
    }
}

/// `n` uniform random points in the domain; every point observes each of
/// `fields`, with value `exact + noise * g`, `g ~ N(0, 1)`.
pub fn generate_observations(
    problem: &ControlProblem,
    fields: &[usize],
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<Observation>, ProblemError> {
    if !(noise >= 0.0) {
        return Err(ProblemError::Invalid(format!("noise level {noise} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * fields.len());
    for _ in 0..n {
        let point: Vec<f64> = problem
            .domain
            .iter()
            .map(|&(a, b)| rng.random_range(a..b))
            .collect();
        for &f in fields {
            let g: f64 = rng.sample(StandardNormal);
            out.push(Observation {
                point: point.clone(),
                field: f,
                value: problem.exact_value(f, &point)? + noise * g,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
