//! Batch execution of verifiers over seeded paths and CSV emission.

use std::fmt::Write as _;

use brownderiv::rules::{self, scaled_band, truth_scale};
use brownderiv::stats::log_log_slope;
use brownderiv::{
    build_semimartingale, derive_stream, exponential_martingale, sample_brownian, Error,
    KernelConfig, PathSeed, ProcessSpec, RealPath, SemimartingalePath, TimeGrid, VerifyOptions,
    VerifyReport,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, S2Kind};
use crate::error::{CliError, CliResult};
use crate::registry::{f_spec, v_spec, x_spec};

pub const CSV_HEADER: &str = "path_index,t,estimate,truth,abs_err,excluded";

/// Errors at or below this level count as exact when fitting the
/// convergence slope.
pub const SLOPE_FLOOR: f64 = 1e-6;

/// Result of a `verify` run.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub reports: Vec<VerifyReport>,
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
    pub excluded_frac: f64,
    pub pass: bool,
    pub csv: String,
}

impl VerifyOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Brownian path number `k` of a run.
pub fn brownian_path(cfg: &ExperimentConfig, grid: &TimeGrid, k: usize) -> CliResult<RealPath> {
    let seed = derive_stream(PathSeed::new(cfg.seed), k as u64)?;
    Ok(sample_brownian(grid, seed))
}

fn primary(cfg: &ExperimentConfig, b: &RealPath) -> CliResult<SemimartingalePath> {
    Ok(build_semimartingale(
        cfg.s0,
        &v_spec(&cfg.v)?,
        &x_spec(&cfg.x)?,
        b,
    )?)
}

fn secondary(cfg: &ExperimentConfig, b: &RealPath) -> CliResult<SemimartingalePath> {
    let x2 = x_spec(&cfg.x2)?;
    match cfg.s2_kind {
        S2Kind::Semimartingale => Ok(build_semimartingale(cfg.s0_2, &v_spec(&cfg.v2)?, &x2, b)?),
        S2Kind::ExpMartingale => {
            let x = build_semimartingale(0.0, &ProcessSpec::zero(), &x2, b)?.x;
            let xi = exponential_martingale(&x, b)?;
            let integrand = xi.zip_with(&x, |e, x| e * x)?;
            Ok(SemimartingalePath::from_observed(
                b.clone(),
                xi,
                integrand,
                x2.is_continuous(),
            )?)
        }
    }
}

/// Runs the configured rule on path `k`.
pub fn verify_path(
    cfg: &ExperimentConfig,
    grid: &TimeGrid,
    kernel: &KernelConfig,
    k: usize,
) -> CliResult<VerifyReport> {
    let b = brownian_path(cfg, grid, k)?;
    let ts = cfg.t_values();
    let opts = VerifyOptions {
        tolerance: cfg.tolerance,
        mask_eps: cfg.mask_eps,
    };
    let report = match cfg.rule.as_str() {
        "ftsc_deriv" => rules::verify_ftsc_derivative(&primary(cfg, &b)?, kernel, &ts, &opts),
        "ftsc_int" => rules::verify_ftsc_integral(&primary(cfg, &b)?, kernel, &ts, &opts),
        "ae_theorem" => {
            rules::verify_ae_theorem(&primary(cfg, &b)?, kernel, &ts, cfg.exceed_frac, &opts)
        }
        "chain" => {
            rules::verify_chain_rule(&primary(cfg, &b)?, &f_spec(&cfg.f)?, kernel, &ts, &opts)
        }
        "chain_convex" => rules::verify_chain_rule_convex(
            &primary(cfg, &b)?,
            &f_spec(&cfg.f)?,
            kernel,
            &ts,
            &opts,
        ),
        "composition" => {
            rules::verify_composition(&primary(cfg, &b)?, &f_spec(&cfg.f)?, kernel, &ts, &opts)
        }
        "power" => rules::verify_power_rule(&primary(cfg, &b)?, cfg.p, kernel, &ts, &opts),
        "sum" => rules::verify_sum(
            &primary(cfg, &b)?,
            &secondary(cfg, &b)?,
            cfg.coef_a,
            cfg.coef_b,
            kernel,
            &ts,
            &opts,
        ),
        "product" => {
            rules::verify_product(&primary(cfg, &b)?, &secondary(cfg, &b)?, kernel, &ts, &opts)
        }
        "ratio" => {
            rules::verify_ratio(&primary(cfg, &b)?, &secondary(cfg, &b)?, kernel, &ts, &opts)
        }
        "mono_lip" => rules::verify_monotone_lipschitz(
            &primary(cfg, &b)?,
            cfg.a,
            cfg.interval_end(),
            kernel,
            &opts,
        ),
        "mart_deriv" => rules::verify_martingale_derivative(
            &f_spec(&cfg.f)?,
            &v_spec(&cfg.v)?,
            &b,
            kernel,
            &ts,
            &opts,
        ),
        "smvt" => {
            return Err(CliError::Config(
                "rule smvt is run with the smvt subcommand".into(),
            ))
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown rule '{other}'; valid rules: {}",
                rules::RULE_NAMES.join(", ")
            )))
        }
    };
    Ok(report?)
}

/// Runs the configured rule over every path and renders the CSV.
pub fn run_verify(cfg: &ExperimentConfig) -> CliResult<VerifyOutcome> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let kernel = cfg.kernel()?;
    let reports = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| verify_path(cfg, &grid, &kernel, k))
        .collect::<CliResult<Vec<_>>>()?;

    let errors: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.abs_errors.iter().copied())
        .filter(|e| !e.is_nan())
        .collect();
    let total: usize = reports.iter().map(|r| r.t_points.len()).sum();
    let excluded: usize = reports
        .iter()
        .map(|r| r.excluded.iter().filter(|&&e| e).count())
        .sum();
    let (max_abs_err, mean_abs_err) = if errors.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            errors.iter().copied().fold(0.0, f64::max),
            errors.iter().sum::<f64>() / errors.len() as f64,
        )
    };
    let excluded_frac = if total == 0 {
        0.0
    } else {
        excluded as f64 / total as f64
    };
    let pass = reports.iter().all(|r| r.pass);

    let mut csv = String::new();
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for (k, r) in reports.iter().enumerate() {
        for i in 0..r.t_points.len() {
            writeln!(
                csv,
                "{k},{},{},{},{},{}",
                r.t_points[i], r.estimates[i], r.truths[i], r.abs_errors[i], r.excluded[i]
            )
            .expect("write to string");
        }
    }
    writeln!(
        csv,
        "# rule={} max_abs_err={max_abs_err} mean_abs_err={mean_abs_err} excluded_frac={excluded_frac} pass={pass}",
        cfg.rule
    )
    .expect("write to string");

    Ok(VerifyOutcome {
        reports,
        max_abs_err,
        mean_abs_err,
        excluded_frac,
        pass,
        csv,
    })
}

/// One resolution of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub rms_error: f64,
    pub max_error: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergenceOutcome {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of RMS error against `dt`; 0 when the errors are at
    /// the floor.
    pub slope: f64,
    pub csv: String,
}

/// Re-runs `verify` at each `dt` of the config (coarsest first) and fits
/// the order of convergence.
pub fn run_convergence(cfg: &ExperimentConfig) -> CliResult<ConvergenceOutcome> {
    let mut dts = cfg.dts.clone();
    if dts.len() < 3 {
        return Err(CliError::Config(format!(
            "convergence needs at least 3 dt values, got {}",
            dts.len()
        )));
    }
    dts.sort_by(|a, b| b.total_cmp(a));
    if dts.windows(2).any(|w| w[0] == w[1]) || dts.iter().any(|d| !(*d > 0.0)) {
        return Err(CliError::Config(
            "dt values must be positive and distinct".into(),
        ));
    }
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in &dts {
        let run = ExperimentConfig { dt, ..cfg.clone() };
        let out = run_verify(&run)?;
        let errs: Vec<f64> = out
            .reports
            .iter()
            .flat_map(|r| r.abs_errors.iter().copied())
            .filter(|e| !e.is_nan())
            .collect();
        rows.push(ConvergenceRow {
            dt,
            rms_error: brownderiv::stats::rms(&errs),
            max_error: out.max_abs_err,
            n_paths: cfg.n_paths,
        });
    }
    let rms: Vec<f64> = rows.iter().map(|r| r.rms_error).collect();
    let slope = log_log_slope(&dts, &rms, SLOPE_FLOOR);
    let slope = if slope.is_finite() { slope } else { 0.0 };

    let mut csv = String::from("dt,rms_error,max_error,n_paths\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{}",
            r.dt, r.rms_error, r.max_error, r.n_paths
        )
        .expect("write to string");
    }
    writeln!(csv, "# slope={slope}").expect("write to string");
    Ok(ConvergenceOutcome { rows, slope, csv })
}

/// Result of an `smvt` run: the CSV line, or a tolerance failure message.
#[derive(Debug, Clone)]
pub struct SmvtOutcome {
    pub result: Option<rules::SmvtResult>,
    pub csv: String,
    pub message: Option<String>,
}

/// Locates a mean-value point on path 0 over `[a, b]`.
pub fn run_smvt(cfg: &ExperimentConfig) -> CliResult<SmvtOutcome> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let kernel = cfg.kernel()?;
    let b = brownian_path(cfg, &grid, 0)?;
    let s = primary(cfg, &b)?;
    let xv = s.x.values();
    let tolerance = cfg.tolerance.unwrap_or_else(|| {
        scaled_band(
            &kernel,
            &grid,
            truth_scale(&grid, |i| xv[i], |_| false, s.continuous),
        )
    });
    match rules::smvt_locate(&s, cfg.a, cfg.interval_end(), &kernel, tolerance) {
        Ok(r) => Ok(SmvtOutcome {
            result: Some(r),
            csv: format!("{},{},{},{},{}\n", r.a, r.b, r.slope, r.c, r.residual),
            message: None,
        }),
        Err(e @ Error::SmvtViolation { .. }) => Ok(SmvtOutcome {
            result: None,
            csv: String::new(),
            message: Some(e.to_string()),
        }),
        Err(e) => Err(e.into()),
    }
}
