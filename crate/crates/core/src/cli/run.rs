use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{io_err, CliError, RunArgs};
use crate::fractional::CaputoMatrix;
use crate::network::save_params;
use crate::problem::{builtin_problem, ControlProblem, ProblemConfig, Settings};
use crate::trainer::{evaluate, train, Evaluation, LossBreakdown, NetKind, TrainConfig, TrainedModel};

#[derive(Clone, Debug)]
pub enum ProblemSource {
    Builtin(String),
    File(PathBuf),
}

/// Everything one `run` invocation needs, with overrides already applied.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ControlProblem,
    pub seed: u64,
    pub models: Vec<NetKind>,
    pub out: PathBuf,
    pub deterministic: bool,
    pub save_caputo: bool,
}

/// Loads a problem and applies command-line overrides.
pub fn build_problem(source: &ProblemSource, args: &RunArgs) -> Result<ControlProblem, CliError> {
    let mut p = match source {
        ProblemSource::Builtin(id) => builtin_problem(id)?,
        ProblemSource::File(path) => ProblemConfig::load(path)?,
    };
    let s = &mut p.settings;
    if let Some(q) = args.quad_order {
        s.quad_order = q;
    }
    if let Some(m) = args.frac_grid {
        s.frac_grid = m;
    }
    if let Some(n) = args.max_iters {
        s.max_iters = n;
    }
    let w = &mut s.weights;
    for (slot, v) in [
        (&mut w.cost, args.weight_cost),
        (&mut w.residual, args.weight_residual),
        (&mut w.boundary, args.weight_boundary),
        (&mut w.observation, args.weight_observation),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(points) = &args.eval_points {
        let points = match points.len() {
            1 => vec![points[0]; p.dim()],
            n if n == p.dim() => points.clone(),
            n => {
                return Err(CliError::Usage(format!(
                    "--eval-points has {n} entries, expected 1 or {}",
                    p.dim()
                )))
            }
        };
        if points.iter().any(|&n| n < 2) {
            return Err(CliError::Usage("--eval-points needs at least 2 points per axis".into()));
        }
        p.eval.points = points;
    }
    p.validate()?;
    Ok(p)
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let source = match (&args.problem, &args.config) {
            (Some(id), None) => ProblemSource::Builtin(id.clone()),
            (None, Some(path)) => ProblemSource::File(path.clone()),
            _ => return Err(CliError::Usage("give exactly one of --problem and --config".into())),
        };
        let problem = build_problem(&source, args)?;
        let mut models: Vec<NetKind> = Vec::new();
        for m in &args.models {
            let k = NetKind::from(*m);
            if !models.contains(&k) {
                models.push(k);
            }
        }
        let out = args
            .out
            .clone()
            .unwrap_or_else(|| Path::new("results").join(&problem.name));
        Ok(RunConfig {
            problem,
            seed: args.seed,
            models,
            out,
            deterministic: args.deterministic,
            save_caputo: args.save_caputo,
        })
    }
}

/// Outcome of one trained model.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub kind: NetKind,
    pub dir: PathBuf,
    pub metrics: BTreeMap<String, f64>,
    pub trained: TrainedModel,
    pub evaluation: Evaluation,
}

impl RunSummary {
    pub fn line(&self) -> String {
        let mut parts = vec![format!("{}:", self.kind.name())];
        for (k, v) in &self.metrics {
            parts.push(format!("{k}={v:.3e}"));
        }
        parts.push(format!("stop={}", self.trained.stop.as_str()));
        parts.join(" ")
    }
}

#[derive(Serialize)]
struct RunInfo<'a> {
    problem: &'a str,
    model: &'a str,
    seed: u64,
    coords: &'a [String],
    fields: &'a [String],
    scalars: Vec<&'a str>,
    settings: SettingsInfo,
    num_params: usize,
    iterations: usize,
    evaluations: usize,
    stop: &'static str,
    final_loss: LossBreakdown,
}

#[derive(Serialize)]
struct SettingsInfo {
    quad_order: usize,
    frac_grid: usize,
    volterra_order: usize,
    max_iters: usize,
    lbfgs_memory: usize,
    weight_cost: f64,
    weight_residual: f64,
    weight_boundary: f64,
    weight_observation: f64,
    eval_points: Vec<usize>,
}

impl SettingsInfo {
    fn new(s: &Settings, eval_points: &[usize]) -> Self {
        SettingsInfo {
            quad_order: s.quad_order,
            frac_grid: s.frac_grid,
            volterra_order: s.volterra_order,
            max_iters: s.max_iters,
            lbfgs_memory: s.lbfgs_memory,
            weight_cost: s.weights.cost,
            weight_residual: s.weights.residual,
            weight_boundary: s.weights.boundary,
            weight_observation: s.weights.observation,
            eval_points: eval_points.to_vec(),
        }
    }
}

fn metrics(problem: &ControlProblem, trained: &TrainedModel, eval: &Evaluation, deterministic: bool) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("J".to_string(), eval.cost);
    for (f, mae) in problem.fields.iter().zip(&eval.mae) {
        m.insert(format!("mae_{f}"), *mae);
    }
    for (s, v) in problem.scalars.iter().zip(trained.scalars()) {
        m.insert(s.name.clone(), v);
        if let Some(exact) = s.exact {
            m.insert(format!("{}_abs_error", s.name), (v - exact).abs());
        }
    }
    m.insert("final_loss".into(), trained.final_loss.total);
    m.insert("iterations".into(), trained.iterations as f64);
    m.insert(
        "wall_time_s".into(),
        if deterministic { 0.0 } else { trained.wall_time_s },
    );
    m
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_solution(path: &Path, problem: &ControlProblem, eval: &Evaluation) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = problem.coords.clone();
    for f in &problem.fields {
        header.push(format!("{f}_pred"));
        header.push(format!("{f}_exact"));
    }
    header.extend(problem.fields.iter().map(|f| format!("{f}_abs_error")));
    w.write_record(&header)?;
    for (i, x) in eval.points.iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        for f in 0..problem.fields.len() {
            rec.push(eval.predicted[f][i].to_string());
            rec.push(eval.exact[f][i].to_string());
        }
        for f in 0..problem.fields.len() {
            rec.push((eval.predicted[f][i] - eval.exact[f][i]).abs().to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Trains every requested model with the same budget and writes
/// `<out>/<model>/{metrics.json, solution.csv, trace.csv, run_info.json}`
/// plus one parameter file per network.
pub fn run(cfg: &RunConfig) -> Result<Vec<RunSummary>, CliError> {
    let problem = &cfg.problem;
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    if cfg.save_caputo {
        let (a, b) = problem.domain[0];
        let alphas = problem.caputo_orders();
        for (i, &alpha) in alphas.iter().enumerate() {
            let name = if alphas.len() == 1 {
                "caputo_matrix.csv".to_string()
            } else {
                format!("caputo_matrix_{i}.csv")
            };
            CaputoMatrix::equidistant(alpha, a, b, problem.settings.frac_grid)?.write_csv(&cfg.out.join(name))?;
        }
    }
    let mut out = Vec::new();
    for &kind in &cfg.models {
        let dir = cfg.out.join(kind.name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let trained = train(problem, &TrainConfig::new(kind, cfg.seed, problem))?;
        let evaluation = evaluate(problem, &trained)?;
        let metrics = metrics(problem, &trained, &evaluation, cfg.deterministic);

        write_json(&dir.join("metrics.json"), &metrics)?;
        write_solution(&dir.join("solution.csv"), problem, &evaluation)?;
        let trace_path = dir.join("trace.csv");
        let mut trace = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
        trained.write_trace(&mut trace, problem).map_err(io_err(&trace_path))?;
        let info = RunInfo {
            problem: &problem.name,
            model: kind.name(),
            seed: cfg.seed,
            coords: &problem.coords,
            fields: &problem.fields,
            scalars: problem.scalars.iter().map(|s| s.name.as_str()).collect(),
            settings: SettingsInfo::new(&problem.settings, &problem.eval.points),
            num_params: trained.model.num_params(),
            iterations: trained.iterations,
            evaluations: trained.evaluations,
            stop: trained.stop.as_str(),
            final_loss: trained.final_loss,
        };
        write_json(&dir.join("run_info.json"), &info)?;
        for (f, name) in problem.fields.iter().enumerate() {
            save_params(
                &dir.join(format!("params_{name}.txt")),
                &trained.model.networks[f],
                trained.model.net_params(f, &trained.params),
                Some(cfg.seed),
            )?;
        }
        out.push(RunSummary {
            kind,
            dir,
            metrics,
            trained,
            evaluation,
        });
    }
    Ok(out)
}
