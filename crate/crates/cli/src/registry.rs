//! Named integrands, drifts and functions available to experiment configs.

use std::f64::consts::PI;

use brownderiv::{FunctionSpec, ProcessSpec, BUILTIN_FUNCTION_NAMES};

use crate::error::{CliError, CliResult};

pub const X_NAMES: &[&str] = &[
    "const:<v>",
    "linear_t",
    "cos_t_times_B",
    "B_itself",
    "scaled_B:<c>",
    "indicator_Bpos",
    "step:<t0>",
    "sin2pi_t",
];

pub const V_NAMES: &[&str] = &["zero", "neg_t", "pos_t", "t_squared"];

fn number(name: &str, s: &str) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad parameter in '{name}'")))
}

/// Integrand `X` by name.
pub fn x_spec(name: &str) -> CliResult<ProcessSpec> {
    let spec = match name.split_once(':') {
        Some(("const", v)) => ProcessSpec::constant(number(name, v)?),
        Some(("scaled_B", c)) => {
            let c = number(name, c)?;
            ProcessSpec::of_brownian(name, true, move |_, b| c * b)
        }
        Some(("step", t0)) => {
            let t0 = number(name, t0)?;
            ProcessSpec::of_time(name, false, move |t| if t >= t0 { 1.0 } else { 0.0 })
        }
        Some(_) => return Err(unknown("X", name, X_NAMES)),
        None => match name {
            "linear_t" => ProcessSpec::of_time(name, true, |t| t),
            "cos_t_times_B" => ProcessSpec::of_brownian(name, true, |t, b| t.cos() * b),
            "B_itself" => ProcessSpec::of_brownian(name, true, |_, b| b),
            "indicator_Bpos" => {
                ProcessSpec::of_brownian(name, false, |_, b| if b > 0.0 { 1.0 } else { 0.0 })
            }
            "sin2pi_t" => ProcessSpec::of_time(name, true, |t| (2.0 * PI * t).sin()),
            _ => return Err(unknown("X", name, X_NAMES)),
        },
    };
    Ok(spec)
}

/// Bounded-variation part `V` by name.
pub fn v_spec(name: &str) -> CliResult<ProcessSpec> {
    Ok(match name {
        "zero" => ProcessSpec::zero(),
        "neg_t" => ProcessSpec::of_time(name, true, |t| -t),
        "pos_t" => ProcessSpec::of_time(name, true, |t| t),
        "t_squared" => ProcessSpec::of_time(name, true, |t| t * t),
        _ => return Err(unknown("V", name, V_NAMES)),
    })
}

pub fn f_spec(name: &str) -> CliResult<FunctionSpec> {
    FunctionSpec::parse(name).map_err(|_| unknown("f", name, BUILTIN_FUNCTION_NAMES))
}

fn unknown(kind: &str, name: &str, valid: &[&str]) -> CliError {
    CliError::Config(format!(
        "unknown {kind} '{name}'; valid names: {}",
        valid.join(", ")
    ))
}
