//! Physics-informed loss over one network per unknown function, and its
//! minimization with L-BFGS.
//!
//! The loss is `wJ * J + wR * sum R^2 + wB * sum B^2 + wO * sum O^2`: the
//! quadrature-approximated cost functional, squared dynamics residuals on the
//! collocation grid, squared condition mismatches on the domain faces and
//! squared observation mismatches.

mod lbfgs;

use std::io::Write;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::autodiff::{Jet, Lift, Real, Tape, Var};
use crate::fractional::{equidistant_grid, CaputoMatrix, FractionalError};
use crate::network::{KanNetwork, MlpNetwork, Network, NetworkError};
use crate::problem::{tensor_points, ControlProblem, Leaf, ProblemError, ProblemExpr};
use crate::quadrature::{integrate_cost, legendre_rule, KernelMatrix, QuadratureError, TensorRule};

pub use lbfgs::{lbfgs_minimize, Eval, LbfgsConfig, LbfgsResult, StopReason};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite {term} value {value} at {point:?}")]
    NonFinite {
        term: &'static str,
        point: Vec<f64>,
        value: f64,
    },
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Fractional(#[from] FractionalError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    Kan,
    Mlp,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Kan => "kan",
            NetKind::Mlp => "mlp",
        }
    }
}

/// One network per field (control first), followed by the trainable scalars
/// in the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub networks: Vec<Network>,
    offsets: Vec<usize>,
    num_scalars: usize,
}

impl Model {
    /// Networks of widths `[d, hidden, 1]`; KAN edges use cubic splines on 5 intervals.
    pub fn new(kind: NetKind, problem: &ControlProblem, hidden: usize) -> Result<Self, TrainError> {
        let widths = [problem.dim(), hidden, 1];
        let networks = (0..problem.fields.len())
            .map(|_| -> Result<Network, NetworkError> {
                Ok(match kind {
                    NetKind::Kan => Network::Kan(KanNetwork::new(&widths, 3, 5)?),
                    NetKind::Mlp => Network::Mlp(MlpNetwork::new(&widths)?),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut offsets = vec![0];
        for n in &networks {
            offsets.push(offsets.last().unwrap() + n.num_params());
        }
        Ok(Model {
            networks,
            offsets,
            num_scalars: problem.scalars.len(),
        })
    }

    pub fn num_network_params(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.num_network_params() + self.num_scalars
    }

    pub fn net_params<'a, T>(&self, f: usize, params: &'a [T]) -> &'a [T] {
        &params[self.offsets[f]..self.offsets[f + 1]]
    }

    pub fn scalar<T: Copy>(&self, k: usize, params: &[T]) -> T {
        params[self.num_network_params() + k]
    }

    /// Network `f` draws its parameters from a seed derived from `seed`;
    /// scalars start at their declared initial values.
    pub fn init_params(&self, problem: &ControlProblem, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(self.num_params());
        for n in &self.networks {
            out.extend(n.init_params(rng.next_u64()));
        }
        out.extend(problem.scalars.iter().map(|s| s.init));
        out
    }
}

/// Supplies field values and input derivatives to the loss.
pub trait FieldSource<T: Real> {
    fn value(&self, field: usize, x: &[f64]) -> T;
    /// Value with first (`order >= 1`) and second (`order == 2`) derivatives
    /// in the physical coordinates.
    fn jet<const N: usize>(&self, field: usize, x: &[f64], order: u8) -> Jet<T, N>;
    fn scalar(&self, k: usize) -> T;
}

/// Networks evaluated on inputs mapped affinely from the domain to `[-1, 1]`.
pub struct NetSource<'a, T> {
    pub model: &'a Model,
    pub params: &'a [T],
    pub domain: &'a [(f64, f64)],
}

impl<T: Real + Lift<T>> FieldSource<T> for NetSource<'_, T> {
    fn value(&self, field: usize, x: &[f64]) -> T {
        let mut input = [T::cst(0.0); 3];
        for (i, (&xi, &(a, b))) in x.iter().zip(self.domain).enumerate() {
            input[i] = T::cst(2.0 * (xi - a) / (b - a) - 1.0);
        }
        let p = self.model.net_params(field, self.params);
        self.model.networks[field].forward(p, &input[..x.len()])[0]
    }

    fn jet<const N: usize>(&self, field: usize, x: &[f64], order: u8) -> Jet<T, N> {
        let input: Vec<Jet<T, N>> = x
            .iter()
            .zip(self.domain)
            .enumerate()
            .map(|(i, (&xi, &(a, b)))| {
                let s = 2.0 / (b - a);
                Jet::coordinate(T::cst(s * (xi - a) - 1.0), i, s, order)
            })
            .collect();
        let p = self.model.net_params(field, self.params);
        self.model.networks[field].forward(p, &input)[0]
    }

    fn scalar(&self, k: usize) -> T {
        self.model.scalar(k, self.params)
    }
}

/// The problem's exact solution, for checking the loss itself.
pub struct ExactSource<'a> {
    pub problem: &'a ControlProblem,
}

impl<T: Real> FieldSource<T> for ExactSource<'_> {
    fn value(&self, field: usize, x: &[f64]) -> T {
        T::cst(self.problem.exact_value(field, x).unwrap_or(f64::NAN))
    }

    fn jet<const N: usize>(&self, field: usize, x: &[f64], order: u8) -> Jet<T, N> {
        let coords: Vec<Jet<T, N>> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Jet::coordinate(T::cst(v), i, 1.0, order))
            .collect();
        match &self.problem.exact[field] {
            Some(e) => e.eval(&mut |l: &Leaf| match l {
                Leaf::Coord(i) => coords[*i],
                _ => Jet::constant(T::cst(f64::NAN)),
            }),
            None => Jet::constant(T::cst(f64::NAN)),
        }
    }

    fn scalar(&self, k: usize) -> T {
        let s = &self.problem.scalars[k];
        T::cst(s.exact.unwrap_or(s.init))
    }
}

/// The four loss terms (unweighted) and their weighted total.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms<T> {
    pub total: T,
    pub cost: T,
    pub residual: T,
    pub boundary: T,
    pub observation: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cost: f64,
    pub residual: f64,
    pub boundary: f64,
    pub observation: f64,
    pub iteration: usize,
}

impl<T: Real> LossTerms<T> {
    pub fn breakdown(&self, iteration: usize) -> LossBreakdown {
        LossBreakdown {
            total: self.total.value(),
            cost: self.cost.value(),
            residual: self.residual.value(),
            boundary: self.boundary.value(),
            observation: self.observation.value(),
            iteration,
        }
    }
}

struct ConditionPoints {
    field: usize,
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

/// Grids, quadrature rules and operator matrices for one problem, built once.
pub struct Assembly {
    pub problem: ControlProblem,
    pub cost_rule: TensorRule,
    pub residual_points: Vec<Vec<f64>>,
    shared_grid: bool,
    caputo_alphas: Vec<f64>,
    caputo: Vec<CaputoMatrix>,
    volterra: Vec<KernelMatrix>,
    residuals: Vec<ProblemExpr>,
    conditions: Vec<ConditionPoints>,
    /// Derivative order each field needs on the residual grid, if used there.
    residual_orders: Vec<Option<u8>>,
}

fn merge(a: Option<u8>, b: u8) -> Option<u8> {
    Some(a.map_or(b, |o| o.max(b)))
}

impl Assembly {
    pub fn new(problem: &ControlProblem) -> Result<Self, TrainError> {
        problem.validate()?;
        let s = &problem.settings;
        let cost_rule = TensorRule::uniform(s.quad_order, &problem.domain)?;
        let caputo_alphas = problem.caputo_orders();
        let fractional = !caputo_alphas.is_empty();
        let residual_points: Vec<Vec<f64>> = if fractional {
            let (a, b) = problem.domain[0];
            equidistant_grid(a, b, s.frac_grid).into_iter().map(|t| vec![t]).collect()
        } else {
            cost_rule.points().map(|p| p.to_vec()).collect()
        };
        let shared_grid = !fractional;
        let caputo = caputo_alphas
            .iter()
            .map(|&alpha| {
                let grid: Vec<f64> = residual_points.iter().map(|p| p[0]).collect();
                CaputoMatrix::new(alpha, &grid)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let inner = legendre_rule(s.volterra_order)?;
        let rows: Vec<f64> = residual_points.iter().map(|p| p[problem.time_axis()]).collect();
        let volterra = problem
            .volterra
            .iter()
            .map(|term| KernelMatrix::new(term.kernel_fn(), &rows, problem.domain[0].0, &inner))
            .collect();
        let residuals: Vec<ProblemExpr> = problem.residuals.iter().map(|r| r.expr()).collect();

        let nf = problem.fields.len();
        let mut residual_orders = vec![None; nf];
        for e in &residuals {
            e.visit_leaves(&mut |l| match l {
                Leaf::Field { field, deriv } => residual_orders[*field] = merge(residual_orders[*field], deriv.order()),
                Leaf::Caputo { field, .. } => residual_orders[*field] = merge(residual_orders[*field], 0),
                _ => {}
            });
        }
        let mut cost_fields = vec![false; nf];
        problem.cost.visit_leaves(&mut |l| {
            if let Leaf::Field { field, .. } = l {
                cost_fields[*field] = true;
            }
        });
        if shared_grid {
            for f in 0..nf {
                if cost_fields[f] {
                    residual_orders[f] = merge(residual_orders[f], 0);
                }
            }
        }

        let gauss = legendre_rule(s.quad_order)?;
        let conditions = problem
            .conditions
            .iter()
            .map(|c| {
                let axes: Vec<Vec<f64>> = problem
                    .domain
                    .iter()
                    .enumerate()
                    .map(|(i, &(a, b))| {
                        if i == c.axis {
                            vec![if c.upper { b } else { a }]
                        } else {
                            gauss.mapped_nodes(a, b)
                        }
                    })
                    .collect();
                let points = tensor_points(&axes);
                let targets = points
                    .iter()
                    .map(|p| {
                        c.target.eval(&mut |l: &Leaf| match l {
                            Leaf::Coord(i) => p[*i],
                            _ => f64::NAN,
                        })
                    })
                    .collect();
                ConditionPoints {
                    field: c.field,
                    points,
                    targets,
                }
            })
            .collect();

        Ok(Assembly {
            problem: problem.clone(),
            cost_rule,
            residual_points,
            shared_grid,
            caputo_alphas,
            caputo,
            volterra,
            residuals,
            conditions,
            residual_orders,
        })
    }

    /// Number of condition points per condition.
    pub fn condition_sizes(&self) -> Vec<usize> {
        self.conditions.iter().map(|c| c.points.len()).collect()
    }

    pub fn loss<T: Real, S: FieldSource<T>>(&self, src: &S) -> Result<LossTerms<T>, TrainError> {
        match self.problem.dim() {
            1 => self.loss_n::<T, S, 1>(src),
            2 => self.loss_n::<T, S, 2>(src),
            _ => self.loss_n::<T, S, 3>(src),
        }
    }

    fn loss_n<T: Real, S: FieldSource<T>, const N: usize>(&self, src: &S) -> Result<LossTerms<T>, TrainError> {
        let p = &self.problem;
        let nf = p.fields.len();
        let non_finite = |term: &'static str, point: &[f64], value: f64| TrainError::NonFinite {
            term,
            point: point.to_vec(),
            value,
        };

        // fields on the residual grid
        let mut jets: Vec<Vec<Jet<T, N>>> = vec![Vec::new(); nf];
        for f in 0..nf {
            if let Some(order) = self.residual_orders[f] {
                jets[f] = self
                    .residual_points
                    .iter()
                    .map(|x| {
                        if order == 0 {
                            Jet::constant(src.value(f, x))
                        } else {
                            src.jet::<N>(f, x, order)
                        }
                    })
                    .collect();
            }
        }

        // Caputo derivatives, per (order, field) pair that occurs
        let mut caputo: Vec<Vec<Option<Vec<T>>>> = vec![vec![None; nf]; self.caputo.len()];
        for e in &self.residuals {
            for l in e.leaves() {
                if let Leaf::Caputo { field, alpha } = l {
                    let a = self.caputo_alphas.iter().position(|x| x == alpha).expect("collected");
                    if caputo[a][*field].is_none() {
                        let vals: Vec<T> = jets[*field].iter().map(|j| j.v).collect();
                        caputo[a][*field] = Some(self.caputo[a].apply(&vals)?);
                    }
                }
            }
        }

        let volterra = self
            .volterra
            .iter()
            .zip(&p.volterra)
            .map(|(m, term)| {
                let vals: Vec<T> = m.inner_nodes().iter().map(|&s| src.value(term.field, &[s])).collect();
                m.apply(&vals)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let scalars: Vec<T> = (0..p.scalars.len()).map(|k| src.scalar(k)).collect();

        let mut squares = Vec::with_capacity(self.residuals.len() * self.residual_points.len());
        for e in &self.residuals {
            for (i, x) in self.residual_points.iter().enumerate() {
                let r = e.eval(&mut |l: &Leaf| match l {
                    Leaf::Coord(k) => T::cst(x[*k]),
                    Leaf::Field { field, deriv } => deriv.pick(&jets[*field][i]),
                    Leaf::Scalar(k) => scalars[*k],
                    Leaf::Caputo { field, alpha } => {
                        let a = self.caputo_alphas.iter().position(|v| v == alpha).expect("collected");
                        caputo[a][*field].as_ref().expect("computed")[i]
                    }
                    Leaf::Volterra(k) => volterra[*k][i],
                    Leaf::Iota => T::cst(f64::NAN),
                });
                if !r.value().is_finite() {
                    return Err(non_finite("residual", x, r.value()));
                }
                squares.push(r * r);
            }
        }
        let residual = sum(&squares);

        // cost functional
        let cost_points: Vec<&[f64]> = self.cost_rule.points().collect();
        let mut integrand = Vec::with_capacity(cost_points.len());
        for (i, x) in cost_points.iter().enumerate() {
            let v = p.cost.eval(&mut |l: &Leaf| match l {
                Leaf::Coord(k) => T::cst(x[*k]),
                Leaf::Field { field, .. } => {
                    if self.shared_grid {
                        jets[*field][i].v
                    } else {
                        src.value(*field, x)
                    }
                }
                _ => T::cst(f64::NAN),
            });
            integrand.push(v);
        }
        let mut cost = integrate_cost(&self.cost_rule, &integrand).map_err(|e| match e {
            QuadratureError::NonFinite { point, value, .. } => non_finite("cost", &point, value),
            e => e.into(),
        })?;
        if let Some(g) = &p.terminal_cost {
            let tf = [p.domain[0].1];
            let v = g.eval(&mut |l: &Leaf| match l {
                Leaf::Field { field, .. } => src.value(*field, &tf),
                _ => T::cst(f64::NAN),
            });
            if !v.value().is_finite() {
                return Err(non_finite("terminal cost", &tf, v.value()));
            }
            cost = cost + v;
        }

        let mut squares = Vec::new();
        for c in &self.conditions {
            for (x, target) in c.points.iter().zip(&c.targets) {
                let r = src.value(c.field, x) - *target;
                if !r.value().is_finite() {
                    return Err(non_finite("boundary", x, r.value()));
                }
                squares.push(r * r);
            }
        }
        let boundary = sum(&squares);

        let mut squares = Vec::new();
        for o in &p.observations {
            let r = src.value(o.field, &o.point) - o.value;
            if !r.value().is_finite() {
                return Err(non_finite("observation", &o.point, r.value()));
            }
            squares.push(r * r);
        }
        let observation = sum(&squares);

        let w = p.settings.weights;
        let total = cost * w.cost + residual * w.residual + boundary * w.boundary + observation * w.observation;
        Ok(LossTerms {
            total,
            cost,
            residual,
            boundary,
            observation,
        })
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, model: &Model, params: &[f64], tape: &mut Tape) -> Result<(LossTerms<f64>, Vec<f64>), TrainError> {
        if params.len() != model.num_params() {
            return Err(TrainError::ParamCount {
                expected: model.num_params(),
                got: params.len(),
            });
        }
        tape.clear();
        let tape: &Tape = tape;
        let vars = tape.vars(params);
        let src = NetSource {
            model,
            params: &vars,
            domain: &self.problem.domain,
        };
        let t = self.loss(&src)?;
        let g = tape.gradient(t.total).wrt_all(&vars);
        let v = LossTerms {
            total: t.total.value(),
            cost: t.cost.value(),
            residual: t.residual.value(),
            boundary: t.boundary.value(),
            observation: t.observation.value(),
        };
        Ok((v, g))
    }

    /// Loss value only.
    pub fn loss_value(&self, model: &Model, params: &[f64]) -> Result<LossTerms<f64>, TrainError> {
        if params.len() != model.num_params() {
            return Err(TrainError::ParamCount {
                expected: model.num_params(),
                got: params.len(),
            });
        }
        self.loss(&NetSource {
            model,
            params,
            domain: &self.problem.domain,
        })
    }
}

fn sum<T: Real>(xs: &[T]) -> T {
    let ones = vec![1.0; xs.len()];
    T::dot_const(xs, &ones)
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub kind: NetKind,
    pub hidden: usize,
    pub seed: u64,
    pub lbfgs: LbfgsConfig,
}

impl TrainConfig {
    pub fn new(kind: NetKind, seed: u64, problem: &ControlProblem) -> Self {
        TrainConfig {
            kind,
            hidden: 10,
            seed,
            lbfgs: LbfgsConfig {
                max_iters: problem.settings.max_iters,
                memory: problem.settings.lbfgs_memory,
                ..LbfgsConfig::default()
            },
        }
    }
}

/// One accepted iterate: the loss breakdown and the trainable scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub loss: LossBreakdown,
    pub scalars: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: Model,
    pub params: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
    pub iterations: usize,
    pub evaluations: usize,
    pub final_loss: LossBreakdown,
    pub wall_time_s: f64,
}

impl TrainedModel {
    pub fn scalars(&self) -> Vec<f64> {
        (0..self.model.num_scalars).map(|k| self.model.scalar(k, &self.params)).collect()
    }

    /// Field `f` at physical point `x`.
    pub fn predict(&self, problem: &ControlProblem, f: usize, x: &[f64]) -> f64 {
        NetSource {
            model: &self.model,
            params: &self.params,
            domain: &problem.domain,
        }
        .value(f, x)
    }

    /// Writes the trace as CSV: iteration, loss terms, scalar values.
    pub fn write_trace(&self, out: &mut impl Write, problem: &ControlProblem) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["iteration", "total", "cost", "residual", "boundary", "observation"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(problem.scalars.iter().map(|s| s.name.clone()));
        w.write_record(&header)?;
        for row in &self.trace {
            let l = &row.loss;
            let mut rec = vec![
                l.iteration.to_string(),
                format!("{:e}", l.total),
                format!("{:e}", l.cost),
                format!("{:e}", l.residual),
                format!("{:e}", l.boundary),
                format!("{:e}", l.observation),
            ];
            rec.extend(row.scalars.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Minimizes the loss starting from `params`.
pub fn train_from(
    assembly: &Assembly,
    model: Model,
    params: Vec<f64>,
    lbfgs: &LbfgsConfig,
) -> Result<TrainedModel, TrainError> {
    let start = Instant::now();
    let mut tape = Tape::new();
    let mut trace = Vec::new();
    let n_net = model.num_network_params();
    let result = lbfgs_minimize(
        |x: &[f64]| -> Result<Eval<LossBreakdown>, TrainError> {
            let (terms, g) = assembly.loss_and_gradient(&model, x, &mut tape)?;
            Ok(Eval {
                f: terms.total,
                g,
                aux: terms.breakdown(0),
            })
        },
        &params,
        lbfgs,
        |iter, x, e| {
            let mut loss = e.aux;
            loss.iteration = iter;
            trace.push(TraceRow {
                loss,
                scalars: x[n_net..].to_vec(),
            });
        },
    )?;
    let mut final_loss = result.best.aux;
    final_loss.iteration = result.iterations;
    Ok(TrainedModel {
        model,
        params: result.x,
        trace,
        stop: result.stop,
        iterations: result.iterations,
        evaluations: result.evaluations,
        final_loss,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Builds the grids, initializes one network per field from `cfg.seed` and
/// trains.
pub fn train(problem: &ControlProblem, cfg: &TrainConfig) -> Result<TrainedModel, TrainError> {
    let assembly = Assembly::new(problem)?;
    let model = Model::new(cfg.kind, problem, cfg.hidden)?;
    let params = model.init_params(problem, cfg.seed);
    train_from(&assembly, model, params, &cfg.lbfgs)
}

/// Fits every network to the exact solution by least squares on a tensor
/// grid of `points` Gauss nodes per dimension, matching the value and every
/// input derivative up to the order the residuals use. Scalars are set to
/// their exact values.
pub fn fit_to_exact(
    problem: &ControlProblem,
    kind: NetKind,
    seed: u64,
    points: usize,
    max_iters: usize,
) -> Result<(Model, Vec<f64>), TrainError> {
    let model = Model::new(kind, problem, 10)?;
    let mut params = model.init_params(problem, seed);
    let cfg = LbfgsConfig {
        max_iters,
        ..LbfgsConfig::default()
    };
    let orders = problem.derivative_orders();
    for f in 0..problem.fields.len() {
        let range = model.offsets[f]..model.offsets[f + 1];
        let fitted = match problem.dim() {
            1 => fit_field::<1>(problem, &model, f, orders[f], points, &params[range.clone()], &cfg)?,
            2 => fit_field::<2>(problem, &model, f, orders[f], points, &params[range.clone()], &cfg)?,
            _ => fit_field::<3>(problem, &model, f, orders[f], points, &params[range.clone()], &cfg)?,
        };
        params[range].copy_from_slice(&fitted);
    }
    for (k, s) in problem.scalars.iter().enumerate() {
        params[model.num_network_params() + k] = s.exact.unwrap_or(s.init);
    }
    Ok((model, params))
}

fn jet_components<T: Real, const N: usize>(j: &Jet<T, N>, dim: usize, order: u8) -> Vec<T> {
    let mut out = vec![j.v];
    if order >= 1 {
        out.extend(j.g[..dim].iter().copied());
    }
    if order >= 2 {
        for a in 0..dim {
            out.extend(j.h[a][a..dim].iter().copied());
        }
    }
    out
}

fn fit_field<const N: usize>(
    problem: &ControlProblem,
    model: &Model,
    f: usize,
    order: u8,
    points: usize,
    init: &[f64],
    cfg: &LbfgsConfig,
) -> Result<Vec<f64>, TrainError> {
    let dim = problem.dim();
    let rule = TensorRule::uniform(points, &problem.domain)?;
    let pts: Vec<Vec<f64>> = rule.points().map(|p| p.to_vec()).collect();
    let targets: Vec<Vec<f64>> = pts
        .iter()
        .map(|x| problem.exact_jet(f, x).map(|j| jet_components(&j, dim, order)))
        .collect::<Result<_, _>>()?;
    let net = &model.networks[f];
    let mut tape = Tape::new();
    let r = lbfgs_minimize(
        |w: &[f64]| -> Result<Eval<()>, TrainError> {
            tape.clear();
            let tape: &Tape = &tape;
            let vars = tape.vars(w);
            let mut sq = Vec::new();
            for (x, target) in pts.iter().zip(&targets) {
                let input: Vec<Jet<Var, N>> = x
                    .iter()
                    .zip(&problem.domain)
                    .enumerate()
                    .map(|(i, (&xi, &(a, b)))| {
                        let s = 2.0 / (b - a);
                        Jet::coordinate(Var::constant(s * (xi - a) - 1.0), i, s, order)
                    })
                    .collect();
                let out = net.forward(&vars, &input)[0];
                for (c, t) in jet_components(&out, dim, order).into_iter().zip(target) {
                    let r = c - *t;
                    sq.push(r * r);
                }
            }
            let loss = sum(&sq);
            Ok(Eval {
                f: loss.value(),
                g: tape.gradient(loss).wrt_all(&vars),
                aux: (),
            })
        },
        init,
        cfg,
        |_, _, _| {},
    )?;
    Ok(r.x)
}

/// Error metrics of a trained model on the problem's evaluation grid.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub points: Vec<Vec<f64>>,
    /// `predicted[f][i]` and `exact[f][i]` per field and grid point.
    pub predicted: Vec<Vec<f64>>,
    pub exact: Vec<Vec<f64>>,
    pub mae: Vec<f64>,
    /// Unweighted cost functional of the trained model.
    pub cost: f64,
}

pub fn evaluate(problem: &ControlProblem, trained: &TrainedModel) -> Result<Evaluation, TrainError> {
    let points = problem.eval.points();
    let nf = problem.fields.len();
    let mut predicted = vec![Vec::with_capacity(points.len()); nf];
    let mut exact = vec![Vec::with_capacity(points.len()); nf];
    for x in &points {
        for f in 0..nf {
            predicted[f].push(trained.predict(problem, f, x));
            exact[f].push(problem.exact_value(f, x)?);
        }
    }
    let mae = (0..nf)
        .map(|f| {
            predicted[f]
                .iter()
                .zip(&exact[f])
                .map(|(p, e)| (p - e).abs())
                .sum::<f64>()
                / points.len() as f64
        })
        .collect();
    let assembly = Assembly::new(problem)?;
    let cost = assembly.loss_value(&trained.model, &trained.params)?.cost;
    Ok(Evaluation {
        points,
        predicted,
        exact,
        mae,
        cost,
    })
}
