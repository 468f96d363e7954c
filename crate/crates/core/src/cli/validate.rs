use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{evaluate, gradient, random_graph, second_derivative};
use crate::fractional::{caputo_monomial, CaputoMatrix};
use crate::network::BSplineBasis;
use crate::quadrature::legendre_rule;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub details: Vec<String>,
}

/// Runs every self-check suite.
pub fn validate() -> Vec<SuiteReport> {
    vec![quadrature_suite(), caputo_suite(), autodiff_suite(), bspline_suite()]
}

fn quadrature_suite() -> SuiteReport {
    let mut details = Vec::new();
    let mut passed = true;
    for q in 1..=16 {
        let rule = match legendre_rule(q) {
            Ok(r) => r,
            Err(e) => {
                passed = false;
                details.push(format!("Q={q}: {e}"));
                continue;
            }
        };
        let mut worst: f64 = 0.0;
        for (a, b) in [(-1.0, 1.0), (0.0, 2.0)] {
            for deg in 0..2 * q {
                let k = deg as i32;
                let got = rule.integrate(a, b, |x| x.powi(k));
                let exact = (b.powi(k + 1) - a.powi(k + 1)) / (k + 1) as f64;
                worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
            }
        }
        if worst > 1e-10 {
            passed = false;
            details.push(format!("Q={q}: max error {worst:.2e} exceeds 1e-10"));
        }
    }
    let cubic = legendre_rule(2).map(|r| r.integrate(0.0, 1.0, |x| 4.0 * x * x * x - x + 2.0));
    let cubic_ok = matches!(cubic, Ok(v) if (v - 2.5).abs() <= 1e-12);
    passed &= cubic_ok;
    details.push(format!(
        "Q=2 cubic: {}",
        if cubic_ok { "pass" } else { "fail" }
    ));
    details.push("degrees 0..2Q-1 for Q=1..16 on [-1,1] and [0,2], error relative to max(1, |exact|)".into());
    SuiteReport {
        name: "quadrature".into(),
        passed,
        details,
    }
}

fn monomial_error(alpha: f64, p: f64, m: usize) -> Result<f64, String> {
    let d = CaputoMatrix::equidistant(alpha, 0.0, 1.0, m).map_err(|e| e.to_string())?;
    let xi: Vec<f64> = d.grid().iter().map(|t| t.powf(p)).collect();
    let y = d.apply(&xi).map_err(|e| e.to_string())?;
    Ok(d.grid()
        .iter()
        .zip(&y)
        .filter(|(t, _)| **t >= 0.05)
        .map(|(&t, &v)| (v - caputo_monomial(alpha, p, t)).abs())
        .fold(0.0, f64::max))
}

fn caputo_suite() -> SuiteReport {
    let mut details = Vec::new();
    let mut passed = true;
    for alpha in [0.3, 0.5, 0.7] {
        for p in [1.0, 1.5, 2.0, 2.5, 3.0] {
            let (fine, coarse) = match (monomial_error(alpha, p, 2000), monomial_error(alpha, p, 250)) {
                (Ok(f), Ok(c)) => (f, c),
                (Err(e), _) | (_, Err(e)) => {
                    passed = false;
                    details.push(format!("alpha={alpha} p={p}: {e}"));
                    continue;
                }
            };
            // p = 1 is reproduced exactly
            let ok = if p == 1.0 {
                fine < 1e-12 && coarse < 1e-12
            } else {
                fine <= 5e-3 && coarse >= 2.0 * fine
            };
            passed &= ok;
            details.push(format!(
                "alpha={alpha} p={p}: max error {fine:.3e} (M=2000), {coarse:.3e} (M=250), ratio {:.2}{}",
                coarse / fine.max(f64::MIN_POSITIVE),
                if ok { "" } else { "  FAIL" }
            ));
        }
    }
    SuiteReport {
        name: "caputo".into(),
        passed,
        details,
    }
}

fn autodiff_suite() -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let close = |ad: f64, fd: f64| (ad - fd).abs() <= 1e-6 * (1.0 + ad.abs());
    let mut first_fail = 0;
    let mut second_fail = 0;
    let mut errors = Vec::new();
    for _ in 0..100 {
        let g = random_graph(&mut rng, 2, 2, 5);
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shifted = |xs: &[f64], ps: &[f64], which: usize, d: f64| -> Result<f64, String> {
            let (mut xs, mut ps) = (xs.to_vec(), ps.to_vec());
            if which < 2 {
                xs[which] += d;
            } else {
                ps[which - 2] += d;
            }
            evaluate(&g, &xs, &ps).map_err(|e| e.to_string())
        };
        let grad = match gradient(&g, &x, &p) {
            Ok(v) => v,
            Err(e) => {
                errors.push(e.to_string());
                continue;
            }
        };
        let ad: Vec<f64> = grad.inputs.iter().chain(&grad.params).copied().collect();
        for (k, &a) in ad.iter().enumerate() {
            match (shifted(&x, &p, k, h), shifted(&x, &p, k, -h)) {
                (Ok(up), Ok(down)) if close(a, (up - down) / (2.0 * h)) => {}
                (Ok(_), Ok(_)) => first_fail += 1,
                (Err(e), _) | (_, Err(e)) => errors.push(e),
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let fd = |d: f64| {
                    let mut xs = x.clone();
                    xs[j] += d;
                    gradient(&g, &xs, &p).map(|q| q.inputs[i])
                };
                match (second_derivative(&g, &x, &p, i, j), fd(h), fd(-h)) {
                    (Ok(a), Ok(up), Ok(down)) if close(a, (up - down) / (2.0 * h)) => {}
                    (Ok(_), Ok(_), Ok(_)) => second_fail += 1,
                    _ => errors.push(format!("second derivative ({i},{j}) failed")),
                }
            }
        }
    }
    let passed = first_fail == 0 && second_fail == 0 && errors.is_empty();
    let mut details = vec![
        format!("gradients on 100 random graphs: {first_fail} mismatches"),
        format!("second derivatives on 100 random graphs: {second_fail} mismatches"),
    ];
    details.extend(errors);
    SuiteReport {
        name: "autodiff".into(),
        passed,
        details,
    }
}

fn bspline_suite() -> SuiteReport {
    let mut passed = true;
    let mut details = Vec::new();
    for (degree, intervals) in [(1, 4), (2, 5), (3, 5), (3, 12)] {
        let basis = match BSplineBasis::uniform(degree, intervals, -1.0, 1.0) {
            Ok(b) => b,
            Err(e) => {
                passed = false;
                details.push(format!("k={degree} G={intervals}: {e}"));
                continue;
            }
        };
        let mut unity: f64 = 0.0;
        let mut linear: f64 = 0.0;
        for s in 0..=400 {
            let x = -1.0 + 2.0 * s as f64 / 400.0;
            let b = basis.eval_all(x);
            unity = unity.max((b.iter().sum::<f64>() - 1.0).abs());
            let lin: f64 = b.iter().enumerate().map(|(i, v)| basis.greville(i) * v).sum();
            linear = linear.max((lin - x).abs());
        }
        let ok = unity <= 1e-10 && linear <= 1e-10;
        passed &= ok;
        details.push(format!(
            "k={degree} G={intervals}: partition of unity {unity:.1e}, linear reproduction {linear:.1e}"
        ));
    }
    SuiteReport {
        name: "bspline".into(),
        passed,
        details,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in validate() {
            assert!(r.passed, "{}: {:?}", r.name, r.details);
        }
    }

    #[test]
    fn half_order_monomials_report_error_and_ratio() {
        let r = caputo_suite();
        let line = r
            .details
            .iter()
            .find(|d| d.starts_with("alpha=0.5 p=2:"))
            .unwrap();
        assert!(line.contains("max error") && line.contains("ratio"));
    }

    #[test]
    fn cubic_line_present() {
        assert!(quadrature_suite().details.iter().any(|d| d == "Q=2 cubic: pass"));
    }
}
