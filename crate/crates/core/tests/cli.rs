use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ocp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocp-kan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn quick_run(problem: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--problem", problem];
    if !extra.contains(&"--max-iters") {
        args.extend(["--max-iters", "3"]);
    }
    args.extend([
        "--frac-grid",
        "100",
        "--out",
        out.to_str().unwrap(),
        "--deterministic",
    ]);
    args.extend_from_slice(extra);
    let o = ocp(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn metrics(dir: &Path) -> BTreeMap<String, f64> {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn frac_forward_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    quick_run("frac_forward", tmp.path(), &["--eval-points", "50", "--save-caputo"]);
    for model in ["kan", "mlp"] {
        let dir = tmp.path().join(model);
        let m = metrics(&dir);
        for key in ["J", "mae_psi", "mae_xi1", "mae_xi2", "wall_time_s"] {
            assert!(m.contains_key(key), "{model} lacks {key}");
        }
        assert_eq!(m["wall_time_s"], 0.0);
        assert_eq!(m["iterations"], 3.0);
        for f in ["trace.csv", "run_info.json", "params_psi.txt", "params_xi1.txt", "params_xi2.txt"] {
            assert!(dir.join(f).is_file(), "{model} lacks {f}");
        }
    }
    let caputo = fs::read_to_string(tmp.path().join("caputo_matrix.csv")).unwrap();
    assert_eq!(caputo.lines().count(), 100);
    assert_eq!(caputo.lines().next().unwrap().split(',').count(), 100);
}

#[test]
fn solution_abs_error_matches_its_own_columns() {
    let tmp = tempfile::tempdir().unwrap();
    quick_run("frac_forward", tmp.path(), &["--models", "kan", "--eval-points", "200"]);
    let mut r = csv::Reader::from_path(tmp.path().join("kan/solution.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["tau", "psi_pred", "psi_exact", "xi1_pred", "xi1_exact", "xi2_pred", "xi2_exact", "psi_abs_error", "xi1_abs_error", "xi2_abs_error"]
    );
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        let v = |name: &str| rec[col(name)].parse::<f64>().unwrap();
        for f in ["psi", "xi1", "xi2"] {
            let diff = (v(&format!("{f}_pred")) - v(&format!("{f}_exact"))).abs();
            assert!((diff - v(&format!("{f}_abs_error"))).abs() <= 1e-15);
        }
        rows += 1;
    }
    assert_eq!(rows, 200);
    // the reported MAE is the mean of the same column
    let m = metrics(&tmp.path().join("kan"));
    let mut r = csv::Reader::from_path(tmp.path().join("kan/solution.csv")).unwrap();
    let mean: f64 = r
        .records()
        .map(|rec| rec.unwrap()[col("psi_abs_error")].parse::<f64>().unwrap())
        .sum::<f64>()
        / 200.0;
    assert!((mean - m["mae_psi"]).abs() <= 1e-14 * (1.0 + mean));
}

#[test]
fn heat2d_solution_columns() {
    let tmp = tempfile::tempdir().unwrap();
    quick_run("heat2d", tmp.path(), &["--models", "mlp", "--eval-points", "4,3,2", "--max-iters", "1"]);
    let text = fs::read_to_string(tmp.path().join("mlp/solution.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("zeta1,zeta2,tau,psi_pred,psi_exact,xi_pred,xi_exact"));
    assert_eq!(text.lines().count(), 1 + 4 * 3 * 2);
}

#[test]
fn frac_inverse_trace_has_kappa_column() {
    let tmp = tempfile::tempdir().unwrap();
    quick_run("frac_inverse", tmp.path(), &["--models", "kan"]);
    let trace = fs::read_to_string(tmp.path().join("kan/trace.csv")).unwrap();
    let header: Vec<&str> = trace.lines().next().unwrap().split(',').collect();
    assert_eq!(header.last(), Some(&"kappa"));
    let m = metrics(&tmp.path().join("kan"));
    assert!((m["kappa_abs_error"] - (m["kappa"] - 15.0 * std::f64::consts::PI.sqrt() / 16.0).abs()).abs() < 1e-15);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    quick_run("ide", a.path(), &[]);
    quick_run("ide", b.path(), &[]);
    for model in ["kan", "mlp"] {
        for f in ["metrics.json", "solution.csv", "trace.csv"] {
            assert_eq!(
                fs::read(a.path().join(model).join(f)).unwrap(),
                fs::read(b.path().join(model).join(f)).unwrap(),
                "{model}/{f}"
            );
        }
    }
}

#[test]
fn config_file_and_weight_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("decay.toml");
    fs::write(
        &cfg,
        r#"
name = "decay"
coords = ["t"]
domain = [[0, 1]]
control = "u"
states = ["x"]
cost = "(x - exp(-t))^2 + u^2"

[[residuals]]
lhs = "d(x, t)"
rhs = "u - x"

[[conditions]]
field = "x"
coord = "t"
side = "lower"
value = "1"

[exact]
u = "0"
x = "exp(-t)"
"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = ocp(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--max-iters",
        "5",
        "--weight-J",
        "0.5",
        "--weight-B",
        "3",
        "--quad-order",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let info: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("kan/run_info.json")).unwrap()).unwrap();
    assert_eq!(info["problem"], "decay");
    assert_eq!(info["settings"]["weight_cost"], 0.5);
    assert_eq!(info["settings"]["weight_boundary"], 3.0);
    assert_eq!(info["settings"]["quad_order"], 12);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    for args in [
        vec!["run", "--problem", "nope", "--out", out],
        vec!["run", "--problem", "ide", "--quad-order", "0", "--out", out],
        vec!["run", "--config", "/nonexistent/p.toml", "--out", out],
    ] {
        let o = ocp(&args);
        assert!(!o.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: "));
    }
}

#[test]
fn table_over_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("frac_forward");
    quick_run("frac_forward", &root, &["--eval-points", "20"]);
    let o = ocp(&["table", root.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| Criteria")).collect();
    assert_eq!(rows.len(), 4, "{text}");
    assert!(text.contains("| Criteria | KAN | MLP |"));

    fs::remove_file(root.join("mlp/metrics.json")).unwrap();
    let o = ocp(&["table", "--format", "csv", root.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing metrics.json"));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(','));

    let o = ocp(&["table"]);
    assert!(!o.status.success());
}

#[test]
fn validate_passes() {
    let o = ocp(&["validate"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    for suite in ["quadrature", "caputo", "autodiff", "bspline"] {
        assert!(text.contains(&format!("PASS {suite}")), "{text}");
    }
    assert!(text.contains("alpha=0.5 p=2: max error"));
    assert!(text.contains("Q=2 cubic: pass"));
}
