//! Experiment configuration: `key = value` lines with `#` comments, then
//! command-line overrides.

use std::path::PathBuf;

use brownderiv::{KernelConfig, Quadrature, TimeGrid, RULE_NAMES};

use crate::error::{CliError, CliResult};
use crate::registry;

/// Where the derivative is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum TPoints {
    /// `n` points `t_end * i / (n + 1)`, `i = 1..=n`.
    Count(usize),
    List(Vec<f64>),
}

/// How the second process of the sum/product/ratio rules is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2Kind {
    /// `s0_2 + V2 + ∫X2 dB`.
    Semimartingale,
    /// Exponential martingale of `X2`.
    ExpMartingale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rule: String,
    pub x: String,
    pub v: String,
    pub f: String,
    pub s0: f64,
    pub x2: String,
    pub v2: String,
    pub s0_2: f64,
    pub s2_kind: S2Kind,
    pub p: f64,
    pub coef_a: f64,
    pub coef_b: f64,
    pub a: f64,
    pub b: Option<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub h0: f64,
    pub levels: usize,
    pub quadrature: Quadrature,
    pub seed: u64,
    pub n_paths: usize,
    pub t_points: TPoints,
    pub tolerance: Option<f64>,
    pub mask_eps: f64,
    pub exceed_frac: f64,
    pub dts: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rule: "ftsc_deriv".into(),
            x: "const:1".into(),
            v: "zero".into(),
            f: "identity".into(),
            s0: 0.0,
            x2: "B_itself".into(),
            v2: "zero".into(),
            s0_2: 0.0,
            s2_kind: S2Kind::Semimartingale,
            p: 2.0,
            coef_a: 1.0,
            coef_b: 1.0,
            a: 0.0,
            b: None,
            t_end: 1.0,
            dt: 1e-5,
            h0: 0.05,
            levels: 4,
            quadrature: Quadrature::Simpson,
            seed: 0,
            n_paths: 1,
            t_points: TPoints::Count(50),
            tolerance: None,
            mask_eps: 0.0,
            exceed_frac: 0.1,
            dts: vec![1e-3, 1e-4, 1e-5],
            out: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

fn list(key: &str, value: &str) -> CliResult<Vec<f64>> {
    value.split(',').map(|v| num(key, v.trim())).collect()
}

impl ExperimentConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'key = value'", n + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "rule" => self.rule = value.into(),
            "x" => self.x = value.into(),
            "v" => self.v = value.into(),
            "f" => self.f = value.into(),
            "s0" => self.s0 = num(key, value)?,
            "x2" => self.x2 = value.into(),
            "v2" => self.v2 = value.into(),
            "s0_2" => self.s0_2 = num(key, value)?,
            "s2_kind" => {
                self.s2_kind = match value {
                    "semimartingale" => S2Kind::Semimartingale,
                    "exp_martingale" => S2Kind::ExpMartingale,
                    _ => {
                        return Err(CliError::Config(format!(
                            "s2_kind must be semimartingale or exp_martingale, got '{value}'"
                        )))
                    }
                }
            }
            "p" => self.p = num(key, value)?,
            "coef_a" => self.coef_a = num(key, value)?,
            "coef_b" => self.coef_b = num(key, value)?,
            "a" => self.a = num(key, value)?,
            "b" => self.b = Some(num(key, value)?),
            "t_end" => self.t_end = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "n_steps" => {
                let n: usize = num(key, value)?;
                self.dt = self.t_end / n as f64;
            }
            "h0" => self.h0 = num(key, value)?,
            "levels" => self.levels = num(key, value)?,
            "quadrature" => {
                self.quadrature = value
                    .parse()
                    .map_err(|e: brownderiv::Error| CliError::Config(e.to_string()))?
            }
            "seed" => self.seed = num(key, value)?,
            "paths" | "n_paths" => self.n_paths = num(key, value)?,
            "t_points" => {
                self.t_points = match value.parse::<usize>() {
                    Ok(n) => TPoints::Count(n),
                    Err(_) => TPoints::List(list(key, value)?),
                }
            }
            "tolerance" => self.tolerance = Some(num(key, value)?),
            "mask_eps" => self.mask_eps = num(key, value)?,
            "exceed_frac" => self.exceed_frac = num(key, value)?,
            "dts" => self.dts = list(key, value)?,
            "out" => self.out = Some(value.into()),
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Checks names and numeric ranges.
    pub fn validate(&self) -> CliResult<()> {
        if !RULE_NAMES.contains(&self.rule.as_str()) {
            return Err(CliError::Config(format!(
                "unknown rule '{}'; valid rules: {}",
                self.rule,
                RULE_NAMES.join(", ")
            )));
        }
        registry::x_spec(&self.x)?;
        registry::v_spec(&self.v)?;
        registry::f_spec(&self.f)?;
        registry::x_spec(&self.x2)?;
        registry::v_spec(&self.v2)?;
        self.grid()?;
        self.kernel()?;
        if self.n_paths == 0 {
            return Err(CliError::Config("paths must be at least 1".into()));
        }
        match &self.t_points {
            TPoints::Count(0) => return Err(CliError::Config("t_points must be positive".into())),
            TPoints::List(ts) if ts.iter().any(|t| !(0.0..=self.t_end).contains(t)) => {
                return Err(CliError::Config(format!(
                    "t_points must lie in [0, {}]",
                    self.t_end
                )))
            }
            _ => {}
        }
        if !(self.mask_eps >= 0.0) || !(0.0..=1.0).contains(&self.exceed_frac) {
            return Err(CliError::Config(
                "mask_eps must be >= 0 and exceed_frac in [0, 1]".into(),
            ));
        }
        if let Some(tol) = self.tolerance {
            if !(tol >= 0.0) {
                return Err(CliError::Config(format!("tolerance {tol} must be >= 0")));
            }
        }
        let b = self.interval_end();
        if !(0.0 <= self.a && self.a < b && b <= self.t_end) {
            return Err(CliError::Config(format!(
                "need 0 <= a < b <= t_end, got a = {}, b = {b}",
                self.a
            )));
        }
        Ok(())
    }

    pub fn interval_end(&self) -> f64 {
        self.b.unwrap_or(self.t_end)
    }

    pub fn grid(&self) -> CliResult<TimeGrid> {
        TimeGrid::with_step(self.t_end, self.dt).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn kernel(&self) -> CliResult<KernelConfig> {
        KernelConfig::new(self.h0, self.levels, self.quadrature)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn t_values(&self) -> Vec<f64> {
        match &self.t_points {
            TPoints::Count(n) => (1..=*n)
                .map(|i| self.t_end * i as f64 / (*n + 1) as f64)
                .collect(),
            TPoints::List(ts) => ts.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_with_comments() {
        let cfg = ExperimentConfig::parse(
            "# experiment\nrule = chain   # trailing\nf = cubic\n\ndt = 1e-4\nt_points = 0.25, 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.rule, "chain");
        assert_eq!(cfg.f, "cubic");
        assert_eq!(cfg.dt, 1e-4);
        assert_eq!(cfg.t_values(), vec![0.25, 0.5]);
        cfg.validate().unwrap();
    }

    #[test]
    fn count_spec_is_uniform_interior() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("t_points", "3").unwrap();
        assert_eq!(cfg.t_values(), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("rule ftsc").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("dt = fast").is_err());
        let cfg = ExperimentConfig::parse("rule = nope").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("ftsc_deriv") && err.contains("mart_deriv"));
        let cfg = ExperimentConfig::parse("a = 0.6\nb = 0.4").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("x = wiggle").unwrap();
        assert!(cfg.validate().is_err());
    }
}
