//! TOML problem descriptions.
//!
//! ```toml
//! name = "decay"
//! coords = ["t"]
//! domain = [[0, 1]]
//! control = "u"
//! states = ["y"]
//! cost = "(y - exp(-t))^2 + u^2"
//!
//! [[residuals]]
//! lhs = "d(y, t)"
//! rhs = "-y + u"
//!
//! [[conditions]]
//! field = "y"
//! coord = "t"
//! side = "lower"
//! value = "1"
//!
//! [exact]
//! y = "exp(-t)"
//! u = "0"
//!
//! [settings]
//! quad_order = 30
//! weight_cost = 1.0
//! ```
//!
//! Bounds and scalar values accept numbers or constant expressions such as
//! `"pi"`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::parse::{constant_value, parse_coord_expr, parse_expr, Allow, Names};
use super::{
    generate_observations, Condition, ControlProblem, EvalGrid, Leaf, Observation, ProblemError, Residual, Settings,
    TrainableScalar,
};

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Expr(String),
}

impl Number {
    fn value(&self, coords: &[String]) -> Result<f64, ProblemError> {
        match self {
            Number::Int(i) => Ok(*i as f64),
            Number::Float(f) => Ok(*f),
            Number::Expr(s) => {
                let e = parse_coord_expr(s, coords)?;
                constant_value(&e).ok_or_else(|| ProblemError::Config(format!("'{s}' is not a constant")))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    pub coords: Vec<String>,
    pub domain: Vec<[Number; 2]>,
    pub control: String,
    pub states: Vec<String>,
    pub cost: String,
    pub terminal_cost: Option<String>,
    #[serde(default)]
    pub scalars: Vec<ScalarConfig>,
    pub residuals: Vec<ResidualConfig>,
    #[serde(default)]
    pub conditions: Vec<ConditionConfig>,
    pub observations: Option<ObservationConfig>,
    #[serde(default)]
    pub exact: BTreeMap<String, String>,
    #[serde(default)]
    pub settings: SettingsConfig,
    pub evaluation: Option<EvalConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarConfig {
    pub name: String,
    pub init: Number,
    pub exact: Option<Number>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualConfig {
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub field: String,
    pub coord: String,
    /// `"lower"` or `"upper"`.
    pub side: String,
    pub value: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    /// Random points drawn from the exact solution.
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fields: Vec<String>,
    /// Explicit data points.
    #[serde(default)]
    pub data: Vec<ObservationPoint>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationPoint {
    pub field: String,
    pub at: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsConfig {
    pub quad_order: Option<usize>,
    pub frac_grid: Option<usize>,
    pub volterra_order: Option<usize>,
    pub max_iters: Option<usize>,
    pub lbfgs_memory: Option<usize>,
    pub weight_cost: Option<f64>,
    pub weight_residual: Option<f64>,
    pub weight_boundary: Option<f64>,
    pub weight_observation: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub domain: Option<Vec<[Number; 2]>>,
    pub points: Option<Vec<usize>>,
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ProblemError> {
        toml::from_str(text).map_err(|e| ProblemError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ControlProblem, ProblemError> {
        Self::from_toml(&std::fs::read_to_string(path)?)?.build()
    }

    pub fn build(&self) -> Result<ControlProblem, ProblemError> {
        let cfg_err = |m: String| ProblemError::Config(m);
        let coords = self.coords.clone();
        let mut fields = vec![self.control.clone()];
        fields.extend(self.states.iter().cloned());
        let scalar_names: Vec<String> = self.scalars.iter().map(|s| s.name.clone()).collect();
        let names = Names {
            coords: &coords,
            fields: &fields,
            scalars: &scalar_names,
        };
        let mut volterra = Vec::new();

        let bounds = |list: &[[Number; 2]]| -> Result<Vec<(f64, f64)>, ProblemError> {
            list.iter()
                .map(|[a, b]| Ok((a.value(&coords)?, b.value(&coords)?)))
                .collect()
        };
        let domain = bounds(&self.domain)?;

        let cost = parse_expr(&self.cost, &names, Allow::VALUES, &mut volterra)?;
        let terminal_cost = self
            .terminal_cost
            .as_deref()
            .map(|s| parse_expr(s, &names, Allow::VALUES, &mut volterra))
            .transpose()?;
        if let Some(t) = &terminal_cost {
            if t.leaves().iter().any(|l| matches!(l, Leaf::Coord(_))) {
                return Err(cfg_err("terminal cost may only use field values".into()));
            }
        }

        let residuals = self
            .residuals
            .iter()
            .map(|r| {
                Ok(Residual {
                    lhs: parse_expr(&r.lhs, &names, Allow::DYNAMICS, &mut volterra)?,
                    rhs: parse_expr(&r.rhs, &names, Allow::DYNAMICS, &mut volterra)?,
                })
            })
            .collect::<Result<Vec<_>, ProblemError>>()?;

        let lookup = |list: &[String], n: &str, what: &str| {
            list.iter()
                .position(|x| x == n)
                .ok_or_else(|| cfg_err(format!("unknown {what} '{n}'")))
        };

        let conditions = self
            .conditions
            .iter()
            .map(|c| {
                let upper = match c.side.as_str() {
                    "lower" => false,
                    "upper" => true,
                    s => return Err(cfg_err(format!("side must be 'lower' or 'upper', got '{s}'"))),
                };
                Ok(Condition {
                    field: lookup(&fields, &c.field, "field")?,
                    axis: lookup(&coords, &c.coord, "coordinate")?,
                    upper,
                    target: parse_coord_expr(&c.value, &coords)?,
                })
            })
            .collect::<Result<Vec<_>, ProblemError>>()?;

        let scalars = self
            .scalars
            .iter()
            .map(|s| {
                Ok(TrainableScalar {
                    name: s.name.clone(),
                    init: s.init.value(&coords)?,
                    exact: s.exact.as_ref().map(|e| e.value(&coords)).transpose()?,
                })
            })
            .collect::<Result<Vec<_>, ProblemError>>()?;

        let exact = fields
            .iter()
            .map(|f| self.exact.get(f).map(|s| parse_coord_expr(s, &coords)).transpose())
            .collect::<Result<Vec<_>, ProblemError>>()?;
        if let Some(k) = self.exact.keys().find(|k| !fields.contains(k)) {
            return Err(cfg_err(format!("exact solution given for unknown field '{k}'")));
        }

        let mut settings = Settings::for_dim(coords.len());
        let s = &self.settings;
        settings.quad_order = s.quad_order.unwrap_or(settings.quad_order);
        settings.frac_grid = s.frac_grid.unwrap_or(settings.frac_grid);
        settings.volterra_order = s.volterra_order.unwrap_or(settings.volterra_order);
        settings.max_iters = s.max_iters.unwrap_or(settings.max_iters);
        settings.lbfgs_memory = s.lbfgs_memory.unwrap_or(settings.lbfgs_memory);
        let w = &mut settings.weights;
        w.cost = s.weight_cost.unwrap_or(w.cost);
        w.residual = s.weight_residual.unwrap_or(w.residual);
        w.boundary = s.weight_boundary.unwrap_or(w.boundary);
        w.observation = s.weight_observation.unwrap_or(w.observation);

        let default_points = match coords.len() {
            1 => vec![1000],
            2 => vec![100, 100],
            d => vec![20; d],
        };
        let eval = match &self.evaluation {
            Some(e) => EvalGrid {
                bounds: match &e.domain {
                    Some(d) => bounds(d)?,
                    None => domain.clone(),
                },
                points: e.points.clone().unwrap_or(default_points),
            },
            None => EvalGrid {
                bounds: domain.clone(),
                points: default_points,
            },
        };

        let mut problem = ControlProblem {
            name: self.name.clone(),
            coords: coords.clone(),
            domain,
            fields: fields.clone(),
            cost,
            terminal_cost,
            residuals,
            volterra,
            conditions,
            observations: Vec::new(),
            scalars,
            exact,
            settings,
            eval,
        };

        if let Some(o) = &self.observations {
            let observed = o
                .fields
                .iter()
                .map(|f| lookup(&fields, f, "field"))
                .collect::<Result<Vec<_>, _>>()?;
            if o.count > 0 {
                if observed.is_empty() {
                    return Err(cfg_err("observations.count given without observations.fields".into()));
                }
                problem.observations = generate_observations(&problem, &observed, o.count, o.noise, o.seed)?;
            }
            for p in &o.data {
                problem.observations.push(Observation {
                    point: p.at.clone(),
                    field: lookup(&fields, &p.field, "field")?,
                    value: p.value,
                });
            }
        }

        problem.validate()?;
        Ok(problem)
    }
}
