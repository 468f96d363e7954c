//! Limited-memory BFGS with a strong-Wolfe line search (cubic interpolation,
//! bracketing then zoom).

use serde::Serialize;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the largest gradient component is at most this.
    pub grad_tol: f64,
    /// Stop when `|f_k - f_{k-1}| <= rel_tol * max(|f_k|, |f_{k-1}|)`.
    pub rel_tol: f64,
    /// Stop when the accepted step is at most this in the max norm.
    pub step_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 2000,
            grad_tol: 1e-9,
            rel_tol: 1e-13,
            step_tol: 1e-14,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    LossChange,
    StepSize,
    MaxIterations,
    /// No point along the search direction decreased the loss.
    LineSearchFailed,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient_tolerance",
            StopReason::LossChange => "loss_change",
            StopReason::StepSize => "step_size",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearchFailed => "line_search_failed",
        }
    }
}

/// Loss, gradient and caller data at one point.
#[derive(Clone, Debug)]
pub struct Eval<A> {
    pub f: f64,
    pub g: Vec<f64>,
    pub aux: A,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult<A> {
    pub x: Vec<f64>,
    pub best: Eval<A>,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizer of the cubic through `(x1, f1, g1)` and `(x2, f2, g2)`, clamped to `bounds`.
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, bounds: Option<(f64, f64)>) -> f64 {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt();
        let pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if pos.is_finite() {
            return pos.max(lo).min(hi);
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone)]
struct Trial<A> {
    t: f64,
    f: f64,
    gtd: f64,
    eval: Option<Eval<A>>,
}

/// Strong-Wolfe search along `d` from `x`; returns the best trial found.
fn strong_wolfe<A: Clone, E>(
    obj: &mut impl FnMut(&[f64]) -> Result<Eval<A>, E>,
    x: &[f64],
    t0: f64,
    d: &[f64],
    start: &Eval<A>,
    gtd0: f64,
    cfg: &LbfgsConfig,
    evals: &mut usize,
) -> Trial<A> {
    let d_norm = max_abs(d);
    let f0 = start.f;
    let mut point = vec![0.0; x.len()];
    let mut probe = |t: f64, evals: &mut usize| -> Trial<A> {
        for ((p, xi), di) in point.iter_mut().zip(x).zip(d) {
            *p = xi + t * di;
        }
        *evals += 1;
        match obj(&point) {
            Ok(e) if e.f.is_finite() => Trial {
                t,
                f: e.f,
                gtd: dot(&e.g, d),
                eval: Some(e),
            },
            _ => Trial {
                t,
                f: f64::INFINITY,
                gtd: f64::NAN,
                eval: None,
            },
        }
    };

    let origin = Trial {
        t: 0.0,
        f: f0,
        gtd: gtd0,
        eval: Some(start.clone()),
    };
    let mut prev = origin.clone();
    let mut cur = probe(t0, evals);
    let mut ls_iter = 0;
    let mut bracket: Vec<Trial<A>>;
    let mut done = false;
    loop {
        if ls_iter >= cfg.max_line_search {
            bracket = vec![origin, cur];
            break;
        }
        if cur.f > f0 + cfg.c1 * cur.t * gtd0 || (ls_iter > 1 && cur.f >= prev.f) {
            bracket = vec![prev, cur];
            break;
        }
        if cur.gtd.abs() <= -cfg.c2 * gtd0 {
            bracket = vec![cur];
            done = true;
            break;
        }
        if cur.gtd >= 0.0 {
            bracket = vec![prev, cur];
            break;
        }
        let min_step = cur.t + 0.01 * (cur.t - prev.t);
        let max_step = cur.t * 10.0;
        let t = cubic_interpolate(prev.t, prev.f, prev.gtd, cur.t, cur.f, cur.gtd, Some((min_step, max_step)));
        prev = cur;
        cur = probe(t, evals);
        ls_iter += 1;
    }

    if done || bracket.len() == 1 {
        return bracket.swap_remove(0);
    }

    let (mut lo, mut hi) = if bracket[0].f <= bracket[1].f { (0, 1) } else { (1, 0) };
    let mut insufficient = false;
    while !done && ls_iter < cfg.max_line_search {
        let (b0, b1) = (bracket[0].t, bracket[1].t);
        if (b1 - b0).abs() * d_norm < 1e-15 {
            break;
        }
        let (bmin, bmax) = (b0.min(b1), b0.max(b1));
        let mut t = cubic_interpolate(
            b0,
            bracket[0].f,
            bracket[0].gtd,
            b1,
            bracket[1].f,
            bracket[1].gtd,
            None,
        );
        let eps = 0.1 * (bmax - bmin);
        if (bmax - t).min(t - bmin) < eps {
            if insufficient || t >= bmax || t <= bmin {
                t = if (t - bmax).abs() < (t - bmin).abs() { bmax - eps } else { bmin + eps };
                insufficient = false;
            } else {
                insufficient = true;
            }
        } else {
            insufficient = false;
        }
        let trial = probe(t, evals);
        ls_iter += 1;
        if trial.f > f0 + cfg.c1 * t * gtd0 || trial.f >= bracket[lo].f {
            bracket[hi] = trial;
            if bracket[0].f <= bracket[1].f {
                lo = 0;
                hi = 1;
            } else {
                lo = 1;
                hi = 0;
            }
        } else {
            if trial.gtd.abs() <= -cfg.c2 * gtd0 {
                done = true;
            } else if trial.gtd * (bracket[hi].t - bracket[lo].t) >= 0.0 {
                bracket[hi] = bracket[lo].clone();
            }
            bracket[lo] = trial;
        }
    }
    bracket.swap_remove(lo)
}

/// Minimizes `obj` from `x0`. `on_iter` sees every accepted iterate
/// (iteration number starting at 0 for the initial point, the point and its
/// evaluation).
pub fn lbfgs_minimize<A: Clone, E>(
    mut obj: impl FnMut(&[f64]) -> Result<Eval<A>, E>,
    x0: &[f64],
    cfg: &LbfgsConfig,
    mut on_iter: impl FnMut(usize, &[f64], &Eval<A>),
) -> Result<LbfgsResult<A>, E> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut evals = 1;
    let mut cur = obj(&x)?;
    on_iter(0, &x, &cur);

    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let mut steps: Vec<Vec<f64>> = Vec::new();
    let mut rho: Vec<f64> = Vec::new();
    let mut alpha = vec![0.0; cfg.memory];
    let mut d = vec![0.0; n];
    let mut h_diag = 1.0;
    let mut prev_g: Vec<f64> = Vec::new();
    let mut t = 0.0;
    let mut iter = 0;

    let stop = loop {
        if max_abs(&cur.g) <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iter >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        iter += 1;

        if iter == 1 {
            for (di, gi) in d.iter_mut().zip(&cur.g) {
                *di = -gi;
            }
        } else {
            let y: Vec<f64> = cur.g.iter().zip(&prev_g).map(|(a, b)| a - b).collect();
            let s: Vec<f64> = d.iter().map(|v| v * t).collect();
            let ys = dot(&y, &s);
            if ys > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && ys > 0.0 {
                if dirs.len() == cfg.memory {
                    dirs.remove(0);
                    steps.remove(0);
                    rho.remove(0);
                }
                h_diag = ys / dot(&y, &y);
                dirs.push(y);
                steps.push(s);
                rho.push(1.0 / ys);
            }
            let mut q: Vec<f64> = cur.g.iter().map(|v| -v).collect();
            for i in (0..dirs.len()).rev() {
                alpha[i] = dot(&steps[i], &q) * rho[i];
                for (qj, yj) in q.iter_mut().zip(&dirs[i]) {
                    *qj -= alpha[i] * yj;
                }
            }
            for qj in q.iter_mut() {
                *qj *= h_diag;
            }
            for i in 0..dirs.len() {
                let beta = dot(&dirs[i], &q) * rho[i];
                for (qj, sj) in q.iter_mut().zip(&steps[i]) {
                    *qj += sj * (alpha[i] - beta);
                }
            }
            d = q;
        }

        let mut gtd = dot(&cur.g, &d);
        if !(gtd < 0.0) {
            // not a descent direction: restart from steepest descent
            dirs.clear();
            steps.clear();
            rho.clear();
            h_diag = 1.0;
            for (di, gi) in d.iter_mut().zip(&cur.g) {
                *di = -gi;
            }
            gtd = dot(&cur.g, &d);
        }
        let t0 = if dirs.is_empty() {
            (1.0f64).min(1.0 / cur.g.iter().map(|v| v.abs()).sum::<f64>())
        } else {
            1.0
        };

        let accepted = |tr: &Trial<A>, f: f64| tr.t > 0.0 && tr.eval.as_ref().is_some_and(|e| e.f <= f);
        let mut trial = strong_wolfe(&mut obj, &x, t0, &d, &cur, gtd, cfg, &mut evals);
        if !accepted(&trial, cur.f) && !dirs.is_empty() {
            // retry once along steepest descent before giving up
            dirs.clear();
            steps.clear();
            rho.clear();
            h_diag = 1.0;
            for (di, gi) in d.iter_mut().zip(&cur.g) {
                *di = -gi;
            }
            let gtd = dot(&cur.g, &d);
            let t0 = (1.0f64).min(1.0 / cur.g.iter().map(|v| v.abs()).sum::<f64>());
            trial = strong_wolfe(&mut obj, &x, t0, &d, &cur, gtd, cfg, &mut evals);
        }
        if !accepted(&trial, cur.f) {
            break StopReason::LineSearchFailed;
        }
        t = trial.t;
        let eval = trial.eval.expect("accepted trial has an evaluation");
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += t * di;
        }
        prev_g = std::mem::replace(&mut cur.g, Vec::new());
        let prev_f = cur.f;
        cur = eval;
        on_iter(iter, &x, &cur);

        if max_abs(&cur.g) <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iter >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        if max_abs(&d) * t <= cfg.step_tol {
            break StopReason::StepSize;
        }
        if (cur.f - prev_f).abs() <= cfg.rel_tol * cur.f.abs().max(prev_f.abs()) {
            break StopReason::LossChange;
        }
    };
    Ok(LbfgsResult {
        x,
        best: cur,
        iterations: iter,
        evaluations: evals,
        stop,
    })
}
