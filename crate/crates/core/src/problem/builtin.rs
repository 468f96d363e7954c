use super::{ControlProblem, ProblemConfig, ProblemError};

pub const BUILTIN_IDS: [&str; 5] = ["frac_forward", "frac_inverse", "ide", "pde2d", "heat2d"];

const FRAC_FORWARD: &str = r#"
name = "frac_forward"
coords = ["tau"]
domain = [[0, 1]]
control = "psi"
states = ["xi1", "xi2"]
cost = "(xi1 - 1 - tau^1.5)^2 + (xi2 - tau^2.5)^2 + (psi - 3*sqrt(pi)/4*tau + tau^2.5)^2"

[[residuals]]
lhs = "caputo(xi1, 0.5)"
rhs = "xi2 + psi"

[[residuals]]
lhs = "caputo(xi2, 0.5)"
rhs = "xi1 + 15*sqrt(pi)/16*tau^2 - tau^1.5 - 1"

[[conditions]]
field = "xi1"
coord = "tau"
side = "lower"
value = "1"

[[conditions]]
field = "xi2"
coord = "tau"
side = "lower"
value = "0"

[exact]
psi = "3*sqrt(pi)/4*tau - tau^2.5"
xi1 = "1 + tau^1.5"
xi2 = "tau^2.5"

[settings]
quad_order = 30
frac_grid = 2000
weight_cost = 0.1
max_iters = 6000
"#;

const FRAC_INVERSE: &str = r#"
name = "frac_inverse"
coords = ["tau"]
domain = [[0, 1]]
control = "psi"
states = ["xi1", "xi2"]
cost = "(xi1 - 1 - tau^1.5)^2 + (xi2 - tau^2.5)^2 + (psi - 3*sqrt(pi)/4*tau + tau^2.5)^2"

[[scalars]]
name = "kappa"
init = 1.0
exact = "15*sqrt(pi)/16"

[[residuals]]
lhs = "caputo(xi1, 0.5)"
rhs = "xi2 + psi"

[[residuals]]
lhs = "caputo(xi2, 0.5)"
rhs = "xi1 + kappa*tau^2 - tau^1.5 - 1"

[observations]
count = 20
noise = 0.05
seed = 0
fields = ["xi1", "xi2"]

[exact]
psi = "3*sqrt(pi)/4*tau - tau^2.5"
xi1 = "1 + tau^1.5"
xi2 = "tau^2.5"

[settings]
quad_order = 30
frac_grid = 2000
weight_cost = 0.1
weight_observation = 1e-4
max_iters = 6000
"#;

const IDE: &str = r#"
name = "ide"
coords = ["tau"]
domain = [[0, 1]]
control = "psi"
states = ["xi"]
cost = "(xi - exp(tau^2))^2 + (psi - 2*tau - 1)^2"

[[residuals]]
lhs = "d(xi, tau)"
rhs = "psi - xi + volterra((2*tau^2 + tau)*exp(iota*tau - iota^2), xi)"

[[conditions]]
field = "xi"
coord = "tau"
side = "lower"
value = "1"

[exact]
psi = "2*tau + 1"
xi = "exp(tau^2)"

[settings]
quad_order = 30
volterra_order = 20
weight_cost = 1e-3
max_iters = 10000
"#;

const PDE2D: &str = r#"
name = "pde2d"
coords = ["zeta", "tau"]
domain = [[0, 1], [0, 1]]
control = "psi"
states = ["xi"]
cost = "(xi - tau^4*sin(zeta))^2 + (psi - tau^3*cos(zeta))^2"

[[residuals]]
lhs = "d(xi, tau)"
rhs = """cos(xi) + 2*sin(zeta)*d(xi, zeta) + d2(xi, zeta) + 6*sin(zeta)*psi - cos(tau^4*sin(zeta)) \
  - tau^3*(tau*sin(2*zeta) - tau*sin(zeta) + 3*sin(2*zeta)) + 4*sin(zeta)*tau^3"""

[[conditions]]
field = "xi"
coord = "tau"
side = "lower"
value = "0"

[[conditions]]
field = "xi"
coord = "zeta"
side = "lower"
value = "0"

[exact]
psi = "tau^3*cos(zeta)"
xi = "tau^4*sin(zeta)"

[settings]
quad_order = 25
weight_cost = 1e-6
max_iters = 15000
"#;

const HEAT2D: &str = r#"
name = "heat2d"
coords = ["zeta1", "zeta2", "tau"]
domain = [[0, "pi"], [0, "pi"], [0, "pi"]]
control = "psi"
states = ["xi"]
cost = "(xi - sin(zeta1)*sin(zeta2)*exp(-tau))^2 + (psi - sqrt(exp(zeta1 + zeta2 - tau)))^2"

[[residuals]]
lhs = "d(xi, tau)"
rhs = "d2(xi, zeta1) + d2(xi, zeta2) + psi + sin(zeta1)*sin(zeta2)*exp(-tau) - exp((zeta1 + zeta2 - tau)/2)"

[[conditions]]
field = "xi"
coord = "tau"
side = "lower"
value = "sin(zeta1)*sin(zeta2)"

[[conditions]]
field = "xi"
coord = "zeta1"
side = "lower"
value = "sin(zeta1)*sin(zeta2)*exp(-tau)"

[[conditions]]
field = "xi"
coord = "zeta1"
side = "upper"
value = "sin(zeta1)*sin(zeta2)*exp(-tau)"

[[conditions]]
field = "xi"
coord = "zeta2"
side = "lower"
value = "sin(zeta1)*sin(zeta2)*exp(-tau)"

[[conditions]]
field = "xi"
coord = "zeta2"
side = "upper"
value = "sin(zeta1)*sin(zeta2)*exp(-tau)"

[exact]
psi = "exp((zeta1 + zeta2 - tau)/2)"
xi = "sin(zeta1)*sin(zeta2)*exp(-tau)"

[settings]
quad_order = 10
weight_cost = 1.0
max_iters = 5000

[evaluation]
domain = [[0, "pi"], [0, "pi"], [0, 1]]
points = [100, 100, 5]
"#;

/// TOML source of a builtin problem.
pub fn builtin_source(id: &str) -> Option<&'static str> {
    match id {
        "frac_forward" => Some(FRAC_FORWARD),
        "frac_inverse" => Some(FRAC_INVERSE),
        "ide" => Some(IDE),
        "pde2d" => Some(PDE2D),
        "heat2d" => Some(HEAT2D),
        _ => None,
    }
}

pub fn builtin_problem(id: &str) -> Result<ControlProblem, ProblemError> {
    let src = builtin_source(id).ok_or_else(|| ProblemError::Unknown(id.to_string()))?;
    ProblemConfig::from_toml(src)?.build()
}
