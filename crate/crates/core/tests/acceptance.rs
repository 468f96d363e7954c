//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails afterwards if any of them failed.
//!
//! Set `ACCEPTANCE_ONLY=1,7,8` to run a subset.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocp_kan::autodiff::{evaluate as eval_graph, gradient, random_graph, second_derivative};
use ocp_kan::fractional::CaputoMatrix;
use ocp_kan::network::BSplineBasis;
use ocp_kan::problem::{builtin_problem, BUILTIN_IDS};
use ocp_kan::quadrature::legendre_rule;
use ocp_kan::trainer::{evaluate, train, Evaluation, NetKind, TrainConfig, TrainedModel};

type Check = fn() -> Outcome;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn fit(id: &str, kind: NetKind, seed: u64) -> (TrainedModel, Evaluation, f64) {
    let problem = builtin_problem(id).unwrap();
    let start = Instant::now();
    let trained = train(&problem, &TrainConfig::new(kind, seed, &problem)).unwrap();
    let eval = evaluate(&problem, &trained).unwrap();
    (trained, eval, start.elapsed().as_secs_f64())
}

fn mae_line(eval: &Evaluation, names: &[&str]) -> String {
    names
        .iter()
        .zip(&eval.mae)
        .map(|(n, m)| format!("MAE({n})={m:.3e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn frac_forward() -> Outcome {
    let (t, e, secs) = fit("frac_forward", NetKind::Kan, 0);
    let ok = e.cost <= 1e-5 && e.mae[0] <= 5e-3 && e.mae[1] <= 1e-3 && e.mae[2] <= 1e-3;
    outcome(
        ok,
        format!(
            "J={:.3e} {} ({} iterations, {secs:.0}s)",
            e.cost,
            mae_line(&e, &["psi", "xi1", "xi2"]),
            t.iterations
        ),
    )
}

fn frac_inverse() -> Outcome {
    let (t, e, secs) = fit("frac_inverse", NetKind::Kan, 0);
    let kappa = t.scalars()[0];
    let exact = 15.0 * PI.sqrt() / 16.0;
    let ok = (kappa - exact).abs() <= 0.05 && e.cost <= 1e-4;
    outcome(
        ok,
        format!(
            "kappa={kappa:.5} (exact {exact:.5}) J={:.3e} {} ({} iterations, {secs:.0}s)",
            e.cost,
            mae_line(&e, &["psi", "xi1", "xi2"]),
            t.iterations
        ),
    )
}

fn ide() -> Outcome {
    let (t, e, secs) = fit("ide", NetKind::Kan, 0);
    let ok = e.mae[1] <= 5e-3 && e.mae[0] <= 2e-2;
    outcome(
        ok,
        format!("J={:.3e} {} ({} iterations, {secs:.0}s)", e.cost, mae_line(&e, &["psi", "xi"]), t.iterations),
    )
}

fn pde2d() -> Outcome {
    let (t, e, secs) = fit("pde2d", NetKind::Kan, 0);
    let ok = e.mae[0] <= 5e-3 && e.mae[1] <= 5e-3;
    outcome(
        ok,
        format!(
            "J={:.3e} loss={:.3e} {} ({} iterations, {secs:.0}s)",
            e.cost,
            t.final_loss.total,
            mae_line(&e, &["psi", "xi"]),
            t.iterations
        ),
    )
}

fn heat2d() -> Outcome {
    let (t, e, secs) = fit("heat2d", NetKind::Kan, 0);
    let ok = e.mae[0] <= 1e-2 && e.mae[1] <= 2e-2;
    outcome(
        ok,
        format!("J={:.3e} {} ({} iterations, {secs:.0}s)", e.cost, mae_line(&e, &["psi", "xi"]), t.iterations),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn kan_vs_mlp() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for id in ["frac_forward", "ide"] {
        let mut kan = Vec::new();
        let mut mlp = Vec::new();
        for seed in 0..3 {
            kan.push(fit(id, NetKind::Kan, seed).1.mae[0]);
            mlp.push(fit(id, NetKind::Mlp, seed).1.mae[0]);
        }
        // soft criterion: only an MLP that wins by more than 5x on every seed fails it
        let dominated = kan.iter().zip(&mlp).all(|(k, m)| 5.0 * m < *k);
        passed &= !dominated;
        let (mk, mm) = (median(kan.clone()), median(mlp.clone()));
        parts.push(format!(
            "{id}: median MAE(psi) KAN {mk:.3e} MLP {mm:.3e} ({})",
            if mk <= mm { "KAN ahead" } else { "MLP ahead" }
        ));
    }
    outcome(passed, parts.join("; "))
}

fn gauss_legendre() -> Outcome {
    let mut worst: f64 = 0.0;
    for q in 1..=16 {
        let rule = legendre_rule(q).unwrap();
        for (a, b) in [(-1.0, 1.0), (0.0, 2.0), (-0.5, 3.0)] {
            for deg in 0..2 * q as i32 {
                let got = rule.integrate(a, b, |x| x.powi(deg));
                let exact = (b.powi(deg + 1) - a.powi(deg + 1)) / (deg + 1) as f64;
                worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    outcome(worst <= 1e-10, format!("max error {worst:.2e} over Q=1..16, degrees 0..2Q-1"))
}

/// Lanczos approximation (g = 7), accurate to about 1e-15 for x > 0.5.
fn gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    let t = x + 7.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * s
}

fn caputo_error(alpha: f64, p: f64, m: usize) -> f64 {
    let d = CaputoMatrix::equidistant(alpha, 0.0, 1.0, m).unwrap();
    let grid: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|t| t.powf(p)).collect();
    let approx = d.apply(&values).unwrap();
    let c = gamma(p + 1.0) / gamma(p + 1.0 - alpha);
    grid.iter()
        .zip(&approx)
        .filter(|(t, _)| **t >= 0.05)
        .map(|(t, v)| (v - c * t.powf(p - alpha)).abs())
        .fold(0.0, f64::max)
}

fn caputo_monomials() -> Outcome {
    let mut passed = true;
    let mut worst: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    for alpha in [0.3, 0.5, 0.7] {
        for p in [1.0, 1.5, 2.0, 2.5, 3.0] {
            let fine = caputo_error(alpha, p, 2000);
            let coarse = caputo_error(alpha, p, 250);
            worst = worst.max(fine);
            passed &= fine <= 5e-3;
            // p = 1 is reproduced exactly
            if fine > 1e-12 {
                min_ratio = min_ratio.min(coarse / fine);
                passed &= coarse / fine >= 2.0;
            } else {
                passed &= coarse <= 1e-12;
            }
        }
    }
    outcome(passed, format!("max error {worst:.3e} at M=2000, smallest refinement ratio {min_ratio:.2}"))
}

fn autodiff_fd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut worst2: f64 = 0.0;
    for _ in 0..100 {
        let g = random_graph(&mut rng, 3, 2, 5);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = gradient(&g, &x, &p).unwrap();
        for i in 0..3 {
            let at = |d: f64| {
                let mut xs = x.clone();
                xs[i] += d;
                eval_graph(&g, &xs, &p).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            worst = worst.max((grad.inputs[i] - fd).abs() / (1.0 + grad.inputs[i].abs()));
        }
        for k in 0..2 {
            let at = |d: f64| {
                let mut ps = p.clone();
                ps[k] += d;
                eval_graph(&g, &x, &ps).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            worst = worst.max((grad.params[k] - fd).abs() / (1.0 + grad.params[k].abs()));
        }
        for i in 0..3 {
            for j in 0..3 {
                let exact = second_derivative(&g, &x, &p, i, j).unwrap();
                let at = |d: f64| {
                    let mut xs = x.clone();
                    xs[j] += d;
                    gradient(&g, &xs, &p).unwrap().inputs[i]
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                worst2 = worst2.max((exact - fd).abs() / (1.0 + exact.abs()));
            }
        }
    }
    outcome(
        worst <= 1e-6 && worst2 <= 1e-6,
        format!("100 graphs: gradient rel. error {worst:.2e}, second derivative rel. error {worst2:.2e}"),
    )
}

/// Cox-de Boor recursion on an explicit knot vector.
fn cox_de_boor(knots: &[f64], i: usize, k: usize, x: f64) -> f64 {
    if k == 0 {
        let last = knots[i + 1] == *knots.last().unwrap() && x == knots[i + 1];
        return if (knots[i] <= x && x < knots[i + 1]) || (last && knots[i] < x) { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if knots[i + k] > knots[i] {
        v += (x - knots[i]) / (knots[i + k] - knots[i]) * cox_de_boor(knots, i, k - 1, x);
    }
    if knots[i + k + 1] > knots[i + 1] {
        v += (knots[i + k + 1] - x) / (knots[i + k + 1] - knots[i + 1]) * cox_de_boor(knots, i + 1, k - 1, x);
    }
    v
}

fn bspline_identities() -> Outcome {
    let mut unity: f64 = 0.0;
    let mut linear: f64 = 0.0;
    let mut recursion: f64 = 0.0;
    for (k, g) in [(1, 3), (2, 5), (3, 5), (3, 10), (4, 7)] {
        let (lo, hi) = (-1.0, 2.0);
        let basis = BSplineBasis::uniform(k, g, lo, hi).unwrap();
        let step = (hi - lo) / g as f64;
        let knots: Vec<f64> = (0..g + 2 * k + 1)
            .map(|j| lo + (j as f64 - k as f64) * step)
            .collect();
        for s in 0..=300 {
            let x = lo + (hi - lo) * s as f64 / 300.0;
            let b = basis.eval_all(x);
            unity = unity.max((b.iter().sum::<f64>() - 1.0).abs());
            // Greville abscissae reproduce the identity
            let lin: f64 = b
                .iter()
                .enumerate()
                .map(|(i, v)| v * knots[i + 1..=i + k].iter().sum::<f64>() / k as f64)
                .sum();
            linear = linear.max((lin - x).abs());
            for (i, v) in b.iter().enumerate() {
                recursion = recursion.max((v - cox_de_boor(&knots, i, k, x)).abs());
            }
        }
    }
    outcome(
        unity <= 1e-10 && linear <= 1e-10 && recursion <= 1e-10,
        format!("partition of unity {unity:.1e}, linear reproduction {linear:.1e}, vs recursion {recursion:.1e}"),
    )
}

fn exact_residuals() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for id in BUILTIN_IDS {
        let problem = builtin_problem(id).unwrap();
        let tol = if problem.is_fractional() { 1e-2 } else { 1e-6 };
        let worst = problem
            .exact_residuals(100, 7)
            .unwrap()
            .into_iter()
            .chain(problem.exact_condition_errors(20).unwrap())
            .fold(0.0, f64::max);
        passed &= worst <= tol;
        parts.push(format!("{id} {worst:.1e}"));
    }
    outcome(passed, parts.join(", "))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let metrics = |sub: &str| {
        let out = tmp.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_ocp-kan"))
            .args(["run", "--problem", "frac_inverse", "--seed", "3", "--max-iters", "40", "--deterministic"])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        ["kan", "mlp"].map(|m| fs::read(out.join(m).join("metrics.json")).unwrap())
    };
    let a = metrics("a");
    let b = metrics("b");
    outcome(a == b, format!("metrics.json {} bytes (kan), {} bytes (mlp)", a[0].len(), a[1].len()))
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(&str, Check); 12] = [
        ("frac_forward reproduction", frac_forward),
        ("frac_inverse parameter recovery", frac_inverse),
        ("ide reproduction", ide),
        ("pde2d reproduction", pde2d),
        ("heat2d reproduction", heat2d),
        ("KAN vs MLP ordering", kan_vs_mlp),
        ("Gauss-Legendre exactness", gauss_legendre),
        ("Caputo monomials", caputo_monomials),
        ("autodiff vs finite differences", autodiff_fd),
        ("B-spline identities", bspline_identities),
        ("exact-solution residuals", exact_residuals),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    writeln!(std::io::stdout().lock()).unwrap();
    for (n, (name, check)) in criteria.iter().enumerate() {
        let n = n + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let r = check();
        let mut out = std::io::stdout().lock();
        writeln!(out, "{} {n:>2} {name}: {}", if r.passed { "PASS" } else { "FAIL" }, r.detail).unwrap();
        out.flush().unwrap();
        if !r.passed {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
