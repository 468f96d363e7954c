use super::*;

#[test]
fn all_builtins_build() {
    for id in BUILTIN_IDS {
        let p = builtin_problem(id).unwrap();
        assert_eq!(p.name, id);
        assert!(p.has_exact());
    }
    assert!(matches!(builtin_problem("nope"), Err(ProblemError::Unknown(_))));
}

#[test]
fn frac_forward_shape() {
    let p = builtin_problem("frac_forward").unwrap();
    assert_eq!(p.num_states(), 2);
    assert_eq!(p.residuals.len(), 2);
    assert_eq!(p.caputo_orders(), vec![0.5]);
    assert_eq!(p.conditions.len(), 2);
    assert_eq!(p.conditions[0].field, 1);
    assert_eq!(p.conditions[1].field, 2);
    let targets: Vec<f64> = p
        .conditions
        .iter()
        .map(|c| parse::constant_value(&c.target).unwrap())
        .collect();
    assert_eq!(targets, vec![1.0, 0.0]);
    assert_eq!(p.settings.frac_grid, 2000);
    assert_eq!(p.settings.weights.cost, 0.1);
}

#[test]
fn frac_inverse_shape() {
    let p = builtin_problem("frac_inverse").unwrap();
    assert!(p.conditions.is_empty());
    assert_eq!(p.scalars.len(), 1);
    let k = p.scalars[0].exact.unwrap();
    assert!((k - 15.0 * std::f64::consts::PI.sqrt() / 16.0).abs() < 1e-15);
    assert!((k - 1.6616755).abs() < 1e-6);
    assert_eq!(p.observations.len(), 40);
    let points: std::collections::BTreeSet<String> =
        p.observations.iter().map(|o| format!("{:?}", o.point)).collect();
    assert_eq!(points.len(), 20);
}

#[test]
fn heat2d_source_and_eval_window() {
    let p = builtin_problem("heat2d").unwrap();
    assert_eq!(p.dim(), 3);
    assert_eq!(p.conditions.len(), 5);
    assert_eq!(p.eval.points, vec![100, 100, 5]);
    assert_eq!(p.eval.bounds[2], (0.0, 1.0));
    assert!((p.domain[2].1 - std::f64::consts::PI).abs() < 1e-15);
    // rhs without the diffusion and control terms is the source
    let (z1, z2, t): (f64, f64, f64) = (0.4, 2.1, 0.7);
    let chi = z1.sin() * z2.sin() * (-t).exp() - ((z1 + z2 - t) / 2.0).exp();
    let rhs = p.residuals[0].rhs.eval(&mut |l: &Leaf| match l {
        Leaf::Coord(i) => [z1, z2, t][*i],
        _ => 0.0,
    });
    assert!((rhs - chi).abs() < 1e-14);
}

#[test]
fn exact_solutions_satisfy_dynamics() {
    for id in BUILTIN_IDS {
        let p = builtin_problem(id).unwrap();
        let tol = if p.is_fractional() { 1e-2 } else { 1e-6 };
        for (r, v) in p.exact_residuals(100, 7).unwrap().into_iter().enumerate() {
            assert!(v <= tol, "{id} residual {r}: {v}");
        }
    }
}

#[test]
fn exact_solutions_satisfy_conditions() {
    for id in BUILTIN_IDS {
        let p = builtin_problem(id).unwrap();
        for (c, v) in p.exact_condition_errors(9).unwrap().into_iter().enumerate() {
            assert!(v <= 1e-12, "{id} condition {c}: {v}");
        }
    }
}

#[test]
fn noise_free_observations_are_exact() {
    let p = builtin_problem("frac_forward").unwrap();
    let obs = generate_observations(&p, &[1, 2], 15, 0.0, 3).unwrap();
    assert_eq!(obs.len(), 30);
    for o in &obs {
        assert!(o.point[0] >= 0.0 && o.point[0] <= 1.0);
        assert_eq!(o.value, p.exact_value(o.field, &o.point).unwrap());
    }
    assert_eq!(obs, generate_observations(&p, &[1, 2], 15, 0.0, 3).unwrap());
    assert_ne!(obs, generate_observations(&p, &[1, 2], 15, 0.0, 4).unwrap());
    assert!(generate_observations(&p, &[1], 3, -1.0, 0).is_err());
}

#[test]
fn observation_noise_level() {
    let p = builtin_problem("frac_forward").unwrap();
    for seed in 0..20 {
        let obs = generate_observations(&p, &[1, 2], 20, 0.05, seed).unwrap();
        let dev: Vec<f64> = obs
            .iter()
            .map(|o| o.value - p.exact_value(o.field, &o.point).unwrap())
            .collect();
        let n = dev.len() as f64;
        let mean = dev.iter().sum::<f64>() / n;
        let std = (dev.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.03..=0.07).contains(&std), "seed {seed}: {std}");
    }
}

const DECAY: &str = r#"
name = "decay"
coords = ["t"]
domain = [[0, 2]]
control = "u"
states = ["y"]
cost = "(y - exp(-t))^2 + u^2"
terminal_cost = "y^2"

[[scalars]]
name = "rate"
init = 0.5

[[residuals]]
lhs = "d(y, t)"
rhs = "-rate*y + u"

[[conditions]]
field = "y"
coord = "t"
side = "lower"
value = "1"

[exact]
y = "exp(-t)"
u = "0"

[settings]
weight_boundary = 10
max_iters = 50
"#;

#[test]
fn user_config() {
    let p = ProblemConfig::from_toml(DECAY).unwrap().build().unwrap();
    assert_eq!(p.fields, vec!["u", "y"]);
    assert_eq!(p.domain, vec![(0.0, 2.0)]);
    assert!(p.terminal_cost.is_some());
    assert_eq!(p.settings.weights.boundary, 10.0);
    assert_eq!(p.settings.weights.cost, 1.0);
    assert_eq!(p.settings.max_iters, 50);
    assert_eq!(p.settings.quad_order, 30);
    assert_eq!(p.eval.points, vec![1000]);
    assert_eq!(p.derivative_orders(), vec![0, 1]);
}

#[test]
fn invalid_configs_rejected() {
    let cases = [
        DECAY.replace("[[0, 2]]", "[[2, 0]]"),
        DECAY.replace("\"-rate*y + u\"", "\"-y + u\""),
        DECAY.replace("side = \"lower\"", "side = \"left\""),
        DECAY.replace("d(y, t)", "d(y, s)"),
        DECAY.replace("weight_boundary = 10", "weight_boundary = -1"),
        DECAY.replace("u = \"0\"", "v = \"0\""),
        DECAY.replace("d(y, t)", "caputo(y, 1.5)"),
        DECAY.replace("cost = ", "price = "),
        DECAY.replace("terminal_cost = \"y^2\"", "terminal_cost = \"t\""),
        DECAY.replace("(y - exp(-t))^2", "d(y, t)^2"),
    ];
    for (i, c) in cases.iter().enumerate() {
        let r = ProblemConfig::from_toml(c).and_then(|cfg| cfg.build());
        assert!(r.is_err(), "case {i} accepted");
    }
}

#[test]
fn multi_dimensional_operators_rejected() {
    let src = builtin_source("pde2d")
        .unwrap()
        .replace("lhs = \"d(xi, tau)\"", "lhs = \"caputo(xi, 0.5)\"");
    assert!(ProblemConfig::from_toml(&src).unwrap().build().is_err());
}

#[test]
fn eval_grid_layout() {
    let g = EvalGrid {
        bounds: vec![(0.0, 1.0), (0.0, 2.0)],
        points: vec![2, 3],
    };
    let pts = g.points();
    assert_eq!(pts.len(), 6);
    assert_eq!(pts[0], vec![0.0, 0.0]);
    assert_eq!(pts[1], vec![0.0, 1.0]);
    assert_eq!(pts[5], vec![1.0, 2.0]);
}
