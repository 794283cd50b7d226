//! Executable checks of the calculus rules obeyed by the stochastic
//! derivative.
//!
//! Each verifier estimates a derivative from simulated covariations and
//! compares it with an analytic truth (the integrand, `f'`, an Itô formula
//! result). The one exception is [`verify_composition`], where both sides are
//! estimates and the default tolerance is doubled.

use rayon::prelude::*;

use crate::covariation::{cross_variation, CovPath};
use crate::error::{Error, Result};
use crate::paths::{RealPath, TimeGrid};
use crate::process::{
    build_semimartingale, ito_integral, FunctionKind, FunctionSpec, ProcessSpec, SemimartingalePath,
};
use crate::sderiv::{
    adapted_profile, derivative_profile, derivative_wrt_fb, stochastic_derivative, KernelConfig,
};

/// Stable rule identifiers.
pub const RULE_NAMES: &[&str] = &[
    "ftsc_deriv",
    "ftsc_int",
    "ae_theorem",
    "chain",
    "chain_convex",
    "composition",
    "power",
    "sum",
    "product",
    "ratio",
    "smvt",
    "mono_lip",
    "mart_deriv",
];

/// Reports with more than this fraction of excluded points fail outright.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.5;

/// Outcome of one verifier on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rule_name: String,
    /// Requested times, in input order.
    pub t_points: Vec<f64>,
    /// NaN at excluded points.
    pub estimates: Vec<f64>,
    pub truths: Vec<f64>,
    /// NaN at excluded points.
    pub abs_errors: Vec<f64>,
    pub excluded: Vec<bool>,
    /// Over non-excluded points; NaN if there are none.
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
    pub tolerance: f64,
    pub excluded_fraction: f64,
    /// Fraction of non-excluded points whose error exceeds the tolerance.
    pub exceed_fraction: f64,
    /// Largest exceedance fraction that still passes (0 except for the
    /// almost-everywhere check).
    pub allowed_exceed: f64,
    pub pass: bool,
}

impl VerifyReport {
    /// Assembles a report. `None` estimates are excluded points, as are
    /// points flagged in `masked`.
    pub fn assemble(
        rule_name: impl Into<String>,
        t_points: Vec<f64>,
        estimates: Vec<Option<f64>>,
        truths: Vec<f64>,
        masked: Vec<bool>,
        tolerance: f64,
        allowed_exceed: f64,
    ) -> Self {
        let n = t_points.len();
        debug_assert!(estimates.len() == n && truths.len() == n && masked.len() == n);
        let mut est = Vec::with_capacity(n);
        let mut errs = Vec::with_capacity(n);
        let mut excluded = Vec::with_capacity(n);
        for i in 0..n {
            match estimates[i] {
                Some(e) if !masked[i] => {
                    est.push(e);
                    errs.push((e - truths[i]).abs());
                    excluded.push(false);
                }
                _ => {
                    est.push(f64::NAN);
                    errs.push(f64::NAN);
                    excluded.push(true);
                }
            }
        }
        let kept: Vec<f64> = errs.iter().copied().filter(|e| !e.is_nan()).collect();
        let n_excluded = n - kept.len();
        let excluded_fraction = if n == 0 {
            0.0
        } else {
            n_excluded as f64 / n as f64
        };
        let (max_abs_err, mean_abs_err, exceed_fraction) = if kept.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let k = kept.len() as f64;
            (
                kept.iter().copied().fold(0.0, f64::max),
                kept.iter().sum::<f64>() / k,
                kept.iter().filter(|&&e| e > tolerance).count() as f64 / k,
            )
        };
        let pass = !kept.is_empty()
            && excluded_fraction <= MAX_EXCLUDED_FRACTION
            && exceed_fraction <= allowed_exceed;
        Self {
            rule_name: rule_name.into(),
            t_points,
            estimates: est,
            truths,
            abs_errors: errs,
            excluded,
            max_abs_err,
            mean_abs_err,
            tolerance,
            excluded_fraction,
            exceed_fraction,
            allowed_exceed,
            pass,
        }
    }
}

/// Knobs shared by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerifyOptions {
    /// Overrides the rule's default tolerance.
    pub tolerance: Option<f64>,
    /// Points where the masked quantity (kink argument, ratio denominator,
    /// power base) is smaller than this in magnitude are excluded.
    pub mask_eps: f64,
}

impl VerifyOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance: Some(tolerance),
            ..Self::default()
        }
    }

    pub fn with_mask(mut self, mask_eps: f64) -> Self {
        self.mask_eps = mask_eps;
        self
    }

    fn tolerance_or(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

/// Located mean-value point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmvtResult {
    pub a: f64,
    pub b: f64,
    /// Secant slope of the covariation over `[a, b]`.
    pub slope: f64,
    pub c: f64,
    /// `|D(c) - slope|`.
    pub residual: f64,
}

fn require_continuous(s: &SemimartingalePath, rule: &str) -> Result<()> {
    if s.continuous {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{rule} needs a continuous integrand"
        )))
    }
}

fn snapped(grid: &TimeGrid, t_points: &[f64]) -> Result<Vec<usize>> {
    t_points.iter().map(|&t| grid.snap(t)).collect()
}

/// Derivative estimates at `t_points`; unresolvable points become `None`.
fn estimates(c: &CovPath, t_points: &[f64], cfg: &KernelConfig) -> Result<Vec<Option<f64>>> {
    derivative_profile(c, t_points, cfg)
        .into_iter()
        .map(|r| match r {
            Ok(e) => Ok(Some(e.value)),
            Err(Error::Resolution(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Size of a truth process for scaling the fluctuation band:
/// `max |X| + sqrt(⟨X⟩_T / T)` over unmasked nodes, where the
/// quadratic-variation term (the roughness of `X`, which the kernel averages
/// over its window) is only included for continuous truths.
pub fn truth_scale(
    grid: &TimeGrid,
    truth: impl Fn(usize) -> f64,
    masked: impl Fn(usize) -> bool,
    continuous: bool,
) -> f64 {
    let mut max: f64 = 0.0;
    let mut qv = 0.0;
    let mut prev: Option<f64> = None;
    for i in 0..grid.len() {
        if masked(i) {
            prev = None;
            continue;
        }
        let x = truth(i);
        if !x.is_finite() {
            prev = None;
            continue;
        }
        max = max.max(x.abs());
        if let Some(p) = prev {
            qv += (x - p) * (x - p);
        }
        prev = Some(x);
    }
    if continuous {
        max + (qv / grid.t_end()).sqrt()
    } else {
        max
    }
}

/// The band of `cfg` multiplied by `max(1, scale)`.
pub fn scaled_band(cfg: &KernelConfig, grid: &TimeGrid, scale: f64) -> f64 {
    cfg.stochastic_band(grid) * scale.max(1.0)
}

/// Compares the derivative of `⟨p, B⟩` with `truth(node)`. The default
/// tolerance is the band scaled by [`truth_scale`].
#[allow(clippy::too_many_arguments)]
fn pointwise(
    rule: &str,
    p: &RealPath,
    b: &RealPath,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
    continuous: bool,
    truth: impl Fn(usize) -> f64,
    masked: impl Fn(usize) -> bool,
) -> Result<VerifyReport> {
    let grid = b.grid();
    cfg.check_grid(grid)?;
    let idx = snapped(grid, t_points)?;
    let c = cross_variation(p, b)?;
    let est = estimates(&c, t_points, cfg)?;
    let tolerance = match opts.tolerance {
        Some(t) => t,
        None => scaled_band(cfg, grid, truth_scale(grid, &truth, &masked, continuous)),
    };
    Ok(VerifyReport::assemble(
        rule,
        t_points.to_vec(),
        est,
        idx.iter().map(|&i| truth(i)).collect(),
        idx.iter().map(|&i| masked(i)).collect(),
        tolerance,
        0.0,
    ))
}

/// `D_B S ≈ X`.
pub fn verify_ftsc_derivative(
    s: &SemimartingalePath,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    require_continuous(s, "ftsc_deriv")?;
    let x = s.x.values();
    pointwise(
        "ftsc_deriv",
        &s.s,
        &s.b,
        cfg,
        t_points,
        opts,
        true,
        |i| x[i],
        |_| false,
    )
}

/// `∫ D_B S dB ≈ S - S0 - V`.
///
/// The integrand is the adapted profile (see
/// [`crate::sderiv::adapted_profile`]) with window `h0`, so the Itô sums
/// never see the future of `B`.
pub fn verify_ftsc_integral(
    s: &SemimartingalePath,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    require_continuous(s, "ftsc_int")?;
    let grid = *s.grid();
    cfg.check_grid(&grid)?;
    let idx = snapped(&grid, t_points)?;
    let c = cross_variation(&s.s, &s.b)?;
    let d = RealPath::new(grid, adapted_profile(&c, cfg))?;
    let r = ito_integral(&d, &s.b)?;
    let (sv, vv, rv) = (s.s.values(), s.v.values(), r.values());
    let truths: Vec<f64> = idx.iter().map(|&i| sv[i] - s.s0 - vv[i]).collect();
    let masked = vec![false; idx.len()];
    let xv = s.x.values();
    let tolerance = opts.tolerance_or(scaled_band(
        cfg,
        &grid,
        truth_scale(&grid, |i| xv[i], |_| false, true),
    ));
    Ok(VerifyReport::assemble(
        "ftsc_int",
        t_points.to_vec(),
        idx.iter().map(|&i| Some(rv[i])).collect(),
        truths,
        masked,
        tolerance,
        0.0,
    ))
}

/// `D_B S = X` off a Lebesgue-null set: passes when at most `exceed_frac`
/// of the points miss the tolerance.
pub fn verify_ae_theorem(
    s: &SemimartingalePath,
    cfg: &KernelConfig,
    t_points: &[f64],
    exceed_frac: f64,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    if !(0.0..=1.0).contains(&exceed_frac) {
        return Err(Error::InvalidArgument(format!(
            "exceed_frac must lie in [0, 1], got {exceed_frac}"
        )));
    }
    let x = s.x.values();
    let mut report = pointwise(
        "ae_theorem",
        &s.s,
        &s.b,
        cfg,
        t_points,
        opts,
        s.continuous,
        |i| x[i],
        |_| false,
    )?;
    report.allowed_exceed = exceed_frac;
    report.pass =
        report.exceed_fraction <= exceed_frac && report.excluded_fraction <= MAX_EXCLUDED_FRACTION;
    Ok(report)
}

/// `D_B f(S) = f'(S) D_B S` for `C^1` functions.
pub fn verify_chain_rule(
    s: &SemimartingalePath,
    f: &FunctionSpec,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    if f.kind() != FunctionKind::C1AbsCont {
        return Err(Error::Precondition(format!(
            "'{}' is not C^1; use the convex chain rule",
            f.name()
        )));
    }
    require_continuous(s, "chain")?;
    let fs = s.s.map(|v| f.f(v))?;
    let (sv, x) = (s.s.values(), s.x.values());
    pointwise(
        "chain",
        &fs,
        &s.b,
        cfg,
        t_points,
        opts,
        true,
        |i| f.f_prime(sv[i]) * x[i],
        |_| false,
    )
}

/// `D_B f(S) = f'_-(S) D_B S` for convex `f`. The kink set is taken to be
/// `{0}`: points with `|S_t| < mask_eps` are excluded.
pub fn verify_chain_rule_convex(
    s: &SemimartingalePath,
    f: &FunctionSpec,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    if f.kind() != FunctionKind::Convex {
        return Err(Error::Precondition(format!("'{}' is not convex", f.name())));
    }
    let fs = s.s.map(|v| f.f(v))?;
    let (sv, x) = (s.s.values(), s.x.values());
    pointwise(
        "chain_convex",
        &fs,
        &s.b,
        cfg,
        t_points,
        opts,
        false,
        |i| f.f_left(sv[i]) * x[i],
        |i| sv[i].abs() < opts.mask_eps,
    )
}

/// `D_B S = D_{f(B)} S · f'(B)`, both sides estimated. Points where the
/// reference rate `d⟨f(B)⟩/dt` is lost in noise are excluded.
pub fn verify_composition(
    s: &SemimartingalePath,
    f: &FunctionSpec,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    if !f.is_nonvanishing() {
        return Err(Error::Precondition(format!(
            "'{}' has a vanishing derivative",
            f.name()
        )));
    }
    let grid = *s.grid();
    cfg.check_grid(&grid)?;
    let idx = snapped(&grid, t_points)?;
    let c = cross_variation(&s.s, &s.b)?;
    let bv = s.b.values();
    let rows: Vec<(Option<f64>, Option<f64>)> = t_points
        .par_iter()
        .zip(&idx)
        .map(|(&t, &i)| {
            let direct = match stochastic_derivative(&c, t, cfg) {
                Ok(e) => Some(e.value),
                Err(Error::Resolution(_)) => None,
                Err(e) => return Err(e),
            };
            let product = match derivative_wrt_fb(s, f, t, cfg) {
                Ok(d) => Some(d * f.chain_derivative(bv[i])),
                Err(Error::IllConditioned { .. }) | Err(Error::Resolution(_)) => None,
                Err(Error::InvalidArgument(_)) if i == 0 || i == grid.n_steps() => None,
                Err(e) => return Err(e),
            };
            Ok((product, direct))
        })
        .collect::<Result<_>>()?;
    let masked: Vec<bool> = rows.iter().map(|(_, d)| d.is_none()).collect();
    let truths: Vec<f64> = rows.iter().map(|(_, d)| d.unwrap_or(f64::NAN)).collect();
    let scale = truths
        .iter()
        .zip(&masked)
        .filter(|(_, &m)| !m)
        .fold(0.0_f64, |acc, (t, _)| acc.max(t.abs()));
    let tolerance = opts.tolerance_or(2.0 * scaled_band(cfg, &grid, scale));
    Ok(VerifyReport::assemble(
        "composition",
        t_points.to_vec(),
        rows.iter().map(|(p, _)| *p).collect(),
        truths,
        masked,
        tolerance,
        0.0,
    ))
}

/// `D_B S^p = p S^{p-1} D_B S`. Points with `|S_t| < mask_eps` are excluded;
/// for `p < 1` the whole path `S^p` must still be finite.
pub fn verify_power_rule(
    s: &SemimartingalePath,
    p: f64,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    if !p.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "exponent {p} is not finite"
        )));
    }
    let f = FunctionSpec::power(p);
    let sp = s.s.map(|v| f.f(v))?;
    let (sv, x) = (s.s.values(), s.x.values());
    pointwise(
        "power",
        &sp,
        &s.b,
        cfg,
        t_points,
        opts,
        s.continuous,
        |i| f.f_prime(sv[i]) * x[i],
        |i| p < 1.0 && sv[i].abs() < opts.mask_eps,
    )
}

fn same_driver(s1: &SemimartingalePath, s2: &SemimartingalePath) -> Result<()> {
    s1.grid().check_same(s2.grid())?;
    if s1.b != s2.b {
        return Err(Error::InvalidArgument(
            "the two semimartingales are driven by different Brownian paths".into(),
        ));
    }
    Ok(())
}

/// `D_B (a S1 + b S2) = a D_B S1 + b D_B S2`.
#[allow(clippy::too_many_arguments)]
pub fn verify_sum(
    s1: &SemimartingalePath,
    s2: &SemimartingalePath,
    a: f64,
    b: f64,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    same_driver(s1, s2)?;
    let (x1, x2) = (s1.x.values(), s2.x.values());
    let sum = s1.s.combine(a, &s2.s, b)?;
    pointwise(
        "sum",
        &sum,
        &s1.b,
        cfg,
        t_points,
        opts,
        s1.continuous && s2.continuous,
        |i| a * x1[i] + b * x2[i],
        |_| false,
    )
}

/// `D_B (S1 S2) = S2 D_B S1 + S1 D_B S2`.
pub fn verify_product(
    s1: &SemimartingalePath,
    s2: &SemimartingalePath,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    same_driver(s1, s2)?;
    let (p1, p2) = (s1.s.values(), s2.s.values());
    let (x1, x2) = (s1.x.values(), s2.x.values());
    let prod = s1.s.zip_with(&s2.s, |u, v| u * v)?;
    pointwise(
        "product",
        &prod,
        &s1.b,
        cfg,
        t_points,
        opts,
        s1.continuous && s2.continuous,
        |i| p2[i] * x1[i] + p1[i] * x2[i],
        |_| false,
    )
}

/// `D_B (S1 / S2) = (S2 D_B S1 - S1 D_B S2) / S2^2`. `S2` must not vanish
/// on the grid; points with `|S2_t| < mask_eps` are excluded.
pub fn verify_ratio(
    s1: &SemimartingalePath,
    s2: &SemimartingalePath,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    same_driver(s1, s2)?;
    let (p1, p2) = (s1.s.values(), s2.s.values());
    let (x1, x2) = (s1.x.values(), s2.x.values());
    let ratio = s1.s.zip_with(&s2.s, |u, v| u / v)?;
    pointwise(
        "ratio",
        &ratio,
        &s1.b,
        cfg,
        t_points,
        opts,
        s1.continuous && s2.continuous,
        |i| (p2[i] * x1[i] - p1[i] * x2[i]) / (p2[i] * p2[i]),
        |i| p2[i].abs() < opts.mask_eps,
    )
}

/// Sum, product and ratio reports, in that order.
#[allow(clippy::too_many_arguments)]
pub fn verify_sum_product_ratio(
    s1: &SemimartingalePath,
    s2: &SemimartingalePath,
    a: f64,
    b: f64,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<[VerifyReport; 3]> {
    Ok([
        verify_sum(s1, s2, a, b, cfg, t_points, opts)?,
        verify_product(s1, s2, cfg, t_points, opts)?,
        verify_ratio(s1, s2, cfg, t_points, opts)?,
    ])
}

/// Finds `c ∈ (a, b)` with `D(c)` equal to the secant slope of `⟨S, B⟩`
/// over `[a, b]`.
///
/// The profile is scanned on up to 256 interior nodes. If it stays within
/// `tolerance` of the slope everywhere the midpoint is returned. Otherwise
/// the sign change of `D - slope` with the largest jump is bisected down to
/// adjacent nodes, and failing any sign change the closest scanned point is
/// accepted if its residual is within `tolerance`.
pub fn smvt_locate(
    s: &SemimartingalePath,
    a: f64,
    b: f64,
    cfg: &KernelConfig,
    tolerance: f64,
) -> Result<SmvtResult> {
    let grid = *s.grid();
    cfg.check_grid(&grid)?;
    if !(a < b) {
        return Err(Error::InvalidArgument(format!(
            "need a < b, got [{a}, {b}]"
        )));
    }
    let (ia, ib) = (grid.snap(a)?, grid.snap(b)?);
    if ib <= ia + 4 {
        return Err(Error::Resolution(format!(
            "[{a}, {b}] spans {} steps; at least 5 are needed",
            ib.saturating_sub(ia)
        )));
    }
    let (a, b) = (grid.node(ia), grid.node(ib));
    let c = cross_variation(&s.s, &s.b)?;
    let cv = c.values();
    let slope = (cv[ib] - cv[ia]) / (b - a);
    let resid = |i: usize| -> Result<Option<f64>> {
        match stochastic_derivative(&c, grid.node(i), cfg) {
            Ok(e) => Ok(Some(e.value - slope)),
            Err(Error::Resolution(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let inner = ib - ia - 1;
    let count = inner.min(256);
    let scan: Vec<usize> = (0..count)
        .map(|k| ia + 1 + (k * (inner - 1)) / (count - 1).max(1))
        .collect();
    let values: Vec<(usize, f64)> = scan
        .par_iter()
        .map(|&i| resid(i).map(|r| r.map(|r| (i, r))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if values.is_empty() {
        return Err(Error::Resolution(format!(
            "no resolvable derivative inside [{a}, {b}]"
        )));
    }
    let result = |i: usize, r: f64| SmvtResult {
        a,
        b,
        slope,
        c: grid.node(i),
        residual: r.abs(),
    };

    if values.iter().all(|(_, r)| r.abs() <= tolerance) {
        let mid = (ia + ib) / 2;
        if let Some(r) = resid(mid)? {
            return Ok(result(mid, r));
        }
    }

    let bracket = values
        .windows(2)
        .filter(|w| w[0].1 == 0.0 || w[0].1.signum() != w[1].1.signum())
        .max_by(|x, y| {
            let jx = (x[1].1 - x[0].1).abs();
            let jy = (y[1].1 - y[0].1).abs();
            jx.total_cmp(&jy)
        });
    if let Some(w) = bracket {
        let (mut lo, mut rlo) = w[0];
        let (mut hi, mut rhi) = w[1];
        while hi - lo > 1 && rlo != 0.0 {
            let mid = lo + (hi - lo) / 2;
            let Some(rm) = resid(mid)? else { break };
            if rm.signum() == rlo.signum() {
                (lo, rlo) = (mid, rm);
            } else {
                (hi, rhi) = (mid, rm);
            }
        }
        return Ok(if rlo.abs() <= rhi.abs() {
            result(lo, rlo)
        } else {
            result(hi, rhi)
        });
    }

    let &(i, r) = values
        .iter()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .expect("non-empty");
    if r.abs() <= tolerance {
        Ok(result(i, r))
    } else {
        Err(Error::SmvtViolation {
            a,
            b,
            residual: r.abs(),
            tolerance,
        })
    }
}

/// Monotonicity and Lipschitz consequences of a bounded derivative on
/// `[a, b]`.
///
/// The covariation is sampled at up to 101 nodes. Each report row is one
/// sampling interval: the estimate is the secant slope of `⟨S, B⟩` over it
/// and the truth is that slope clamped to the admissible range `[-K, K]`
/// with `K = max |D| + band`, narrowed to `[0, K]` when the profile is
/// nonnegative up to the band (or `[-K, 0]` when nonpositive). The error is
/// the distance outside the range. Bounding every adjacent secant bounds
/// every pair of sampled points.
pub fn verify_monotone_lipschitz(
    s: &SemimartingalePath,
    a: f64,
    b: f64,
    cfg: &KernelConfig,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let grid = *s.grid();
    cfg.check_grid(&grid)?;
    let (ia, ib) = (grid.snap(a)?, grid.snap(b)?);
    if ib < ia + 2 {
        return Err(Error::Resolution(format!(
            "[{a}, {b}] is too short to sample"
        )));
    }
    let band = opts.tolerance_or(cfg.stochastic_band(&grid));
    let span = ib - ia;
    let count = span.min(100);
    let nodes: Vec<usize> = (0..=count).map(|k| ia + k * span / count).collect();
    let ts: Vec<f64> = nodes.iter().map(|&i| grid.node(i)).collect();

    let c = cross_variation(&s.s, &s.b)?;
    let profile: Vec<f64> = estimates(&c, &ts, cfg)?.into_iter().flatten().collect();
    if profile.is_empty() {
        return Err(Error::Resolution(format!(
            "no resolvable derivative inside [{a}, {b}]"
        )));
    }
    let k = profile.iter().fold(0.0_f64, |m, d| m.max(d.abs())) + band;
    let lo = if profile.iter().all(|&d| d >= -band) {
        0.0
    } else {
        -k
    };
    let hi = if profile.iter().all(|&d| d <= band) {
        0.0
    } else {
        k
    };

    let cv = c.values();
    let secants: Vec<f64> = nodes
        .windows(2)
        .map(|w| (cv[w[1]] - cv[w[0]]) / (grid.node(w[1]) - grid.node(w[0])))
        .collect();
    let n = secants.len();
    Ok(VerifyReport::assemble(
        "mono_lip",
        ts[..n].to_vec(),
        secants.iter().map(|&d| Some(d)).collect(),
        secants.iter().map(|d| d.clamp(lo, hi)).collect(),
        vec![false; n],
        band,
        0.0,
    ))
}

/// `D_B (f(B) + V) = f'(B)` (left derivative for convex `f`).
pub fn verify_martingale_derivative(
    f: &FunctionSpec,
    v_spec: &ProcessSpec,
    b: &RealPath,
    cfg: &KernelConfig,
    t_points: &[f64],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let v = build_semimartingale(0.0, v_spec, &ProcessSpec::zero(), b)?.v;
    let s = b.map(|x| f.f(x))?.combine(1.0, &v, 1.0)?;
    let bv = b.values();
    pointwise(
        "mart_deriv",
        &s,
        b,
        cfg,
        t_points,
        opts,
        f.kind() == FunctionKind::C1AbsCont,
        |i| f.chain_derivative(bv[i]),
        |_| false,
    )
}
