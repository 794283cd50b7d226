//! The stochastic difference kernel and the derivative estimators built on it.
//!
//! For a covariation curve `C = ⟨S, B⟩` the stochastic difference at `t > 0`
//! with half-width `h` is
//!
//! ```text
//! D_h(t) = 3 / (2 h^3) ∫_0^h r [C(t + r) - C(t - r)] dr
//! ```
//!
//! and at `t = 0` it is `3 / h^3 ∫_0^h r C(r) dr`. The derivative is the
//! limit `h -> 0`, realized here by evaluating `D_h` on a geometric schedule
//! `h_j = h0 2^-j` and extrapolating by least squares. The interior kernel is
//! symmetric in `r`, so its bias is even in `h` and the fit is in `h^2`; the
//! `t = 0` kernel is one-sided and is fitted in `h`.
//!
//! Times and widths are snapped to grid nodes. Near either end of the grid
//! the schedule is scaled down to `min(h0, t, t_end - t) 2^-j` so the window
//! stays inside `[0, t_end]`; levels narrower than four steps are dropped.

use rayon::prelude::*;

use crate::covariation::{cross_variation, quadratic_variation, CovPath};
use crate::error::{Error, Result};
use crate::paths::TimeGrid;
use crate::process::{FunctionSpec, SemimartingalePath};

/// Fewest grid steps a kernel half-width may span.
pub const MIN_KERNEL_STEPS: usize = 4;
/// Fewest grid steps a strong-derivative half-window may span.
pub const MIN_STRONG_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Trapezoid,
    Simpson,
}

impl std::str::FromStr for Quadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trapezoid" => Ok(Self::Trapezoid),
            "simpson" => Ok(Self::Simpson),
            _ => Err(Error::InvalidArgument(format!(
                "unknown quadrature '{s}' (expected trapezoid or simpson)"
            ))),
        }
    }
}

/// Half-width schedule `h_j = h0 2^-j`, `j = 0..levels`, and the quadrature
/// used for the kernel integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub h0: f64,
    pub levels: usize,
    pub quadrature: Quadrature,
}

impl KernelConfig {
    pub fn new(h0: f64, levels: usize, quadrature: Quadrature) -> Result<Self> {
        if !(h0.is_finite() && h0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "h0 must be positive, got {h0}"
            )));
        }
        if levels == 0 || levels > 60 {
            return Err(Error::InvalidArgument(format!(
                "levels must be in 1..=60, got {levels}"
            )));
        }
        Ok(Self {
            h0,
            levels,
            quadrature,
        })
    }

    pub fn h_min(&self) -> f64 {
        self.h0 * 0.5f64.powi(self.levels as i32 - 1)
    }

    pub fn schedule(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.levels).map(move |j| self.h0 * 0.5f64.powi(j as i32))
    }

    /// Checks that every level spans at least [`MIN_KERNEL_STEPS`] steps.
    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        let need = MIN_KERNEL_STEPS as f64 * grid.dt();
        if self.h_min() < need * (1.0 - 1e-9) {
            return Err(Error::Resolution(format!(
                "smallest half-width {} is below {} (4 dt)",
                self.h_min(),
                need
            )));
        }
        Ok(())
    }

    /// Pointwise fluctuation band `3 sqrt(2 dt / h_min)` for estimates built
    /// from a covariation of unit-rate Brownian noise.
    pub fn stochastic_band(&self, grid: &TimeGrid) -> f64 {
        3.0 * (2.0 * grid.dt() / self.h_min()).sqrt()
    }
}

/// Extrapolated derivative at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivEstimate {
    /// Snapped time.
    pub t: f64,
    pub value: f64,
    /// `(h, D_h)` for every level that was used, largest `h` first.
    pub per_h: Vec<(f64, f64)>,
    /// Fitted coefficient of `h^2` (of `h` at `t = 0`).
    pub bias_est: f64,
    /// RMS residual of the fit.
    pub noise_est: f64,
    /// Whether the schedule was shrunk to fit inside the grid.
    pub clamped: bool,
    /// Distance between the requested and the snapped time.
    pub snap_offset: f64,
}

/// One-sided derivatives of a covariation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSidedDerivs {
    pub d_plus: f64,
    /// Absent at `t = 0`.
    pub d_minus: Option<f64>,
}

/// Kernel sum at node `i` with half-width `m` steps.
fn kernel(c: &[f64], dt: f64, i: usize, m: usize, quad: Quadrature) -> f64 {
    debug_assert!(m >= 2);
    let mut acc = 0.0;
    if i == 0 {
        match quad {
            Quadrature::Simpson => {
                for k in 1..m {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * k as f64 * c[k];
                }
                acc += m as f64 * c[m];
                acc /= 3.0;
            }
            Quadrature::Trapezoid => {
                for k in 1..m {
                    acc += k as f64 * c[k];
                }
                acc += 0.5 * m as f64 * c[m];
            }
        }
        let mf = m as f64;
        3.0 * acc / (mf * mf * mf * dt)
    } else {
        match quad {
            Quadrature::Simpson => {
                for k in 1..m {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * k as f64 * (c[i + k] - c[i - k]);
                }
                acc += m as f64 * (c[i + m] - c[i - m]);
                acc /= 3.0;
            }
            Quadrature::Trapezoid => {
                for k in 1..m {
                    acc += k as f64 * (c[i + k] - c[i - k]);
                }
                acc += 0.5 * m as f64 * (c[i + m] - c[i - m]);
            }
        }
        let mf = m as f64;
        1.5 * acc / (mf * mf * mf * dt)
    }
}

/// Room available for a symmetric window at node `i` (one-sided at 0).
fn room(grid: &TimeGrid, i: usize) -> usize {
    if i == 0 {
        grid.n_steps()
    } else {
        i.min(grid.n_steps() - i)
    }
}

/// Snaps `h` to whole steps (even ones for Simpson) and clamps to `room`.
fn kernel_steps(grid: &TimeGrid, h: f64, room: usize, quad: Quadrature) -> (usize, bool) {
    let want = grid.steps_for(h);
    let clamped = want > room;
    let mut m = want.min(room);
    if quad == Quadrature::Simpson {
        m -= m % 2;
    }
    (m, clamped)
}

/// Stochastic difference `D_h` of `c` at time `t`.
pub fn stochastic_difference(c: &CovPath, t: f64, h: f64, cfg: &KernelConfig) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "h must be positive, got {h}"
        )));
    }
    let grid = c.grid();
    let i = grid.snap(t)?;
    let (m, _) = kernel_steps(grid, h, room(grid, i), cfg.quadrature);
    if m < MIN_KERNEL_STEPS {
        return Err(Error::Resolution(format!(
            "half-width at t = {t} spans {m} steps after clamping, need {MIN_KERNEL_STEPS}"
        )));
    }
    Ok(kernel(c.values(), grid.dt(), i, m, cfg.quadrature))
}

/// Least-squares fit `y = a + b x`; returns `(a, b, rms residual)`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - a - b * x;
            r * r
        })
        .sum();
    (a, b, (rss / n).sqrt())
}

fn estimate_at_node(c: &CovPath, i: usize, cfg: &KernelConfig) -> Result<DerivEstimate> {
    let grid = c.grid();
    let dt = grid.dt();
    let room = room(grid, i);
    let t = grid.node(i);
    let base = if i == 0 {
        cfg.h0.min(grid.t_end())
    } else {
        cfg.h0.min(t).min(grid.t_end() - t)
    };
    let clamped = base < cfg.h0;

    let mut per_h: Vec<(f64, f64)> = Vec::with_capacity(cfg.levels);
    let mut last_m = usize::MAX;
    for j in 0..cfg.levels {
        let (m, _) = kernel_steps(grid, base * 0.5f64.powi(j as i32), room, cfg.quadrature);
        if m < MIN_KERNEL_STEPS || m == last_m {
            continue;
        }
        last_m = m;
        per_h.push((m as f64 * dt, kernel(c.values(), dt, i, m, cfg.quadrature)));
    }
    if per_h.len() < 2 {
        return Err(Error::Resolution(format!(
            "only {} usable kernel level(s) at t = {t}",
            per_h.len()
        )));
    }

    let power = if i == 0 { 1 } else { 2 };
    let xs: Vec<f64> = per_h.iter().map(|(h, _)| h.powi(power)).collect();
    let ys: Vec<f64> = per_h.iter().map(|(_, d)| *d).collect();
    let (value, bias_est, noise_est) = linear_fit(&xs, &ys);
    if !value.is_finite() {
        return Err(Error::NumericDomain {
            index: i,
            what: format!("extrapolated derivative {value}"),
        });
    }
    Ok(DerivEstimate {
        t,
        value,
        per_h,
        bias_est,
        noise_est,
        clamped,
        snap_offset: 0.0,
    })
}

/// Stochastic derivative of `c` at `t`: the kernel on every level of the
/// schedule, extrapolated to `h = 0`.
pub fn stochastic_derivative(c: &CovPath, t: f64, cfg: &KernelConfig) -> Result<DerivEstimate> {
    let i = c.grid().snap(t)?;
    let mut est = estimate_at_node(c, i, cfg)?;
    est.snap_offset = (est.t - t).abs();
    Ok(est)
}

/// Derivative estimates at many times, in input order.
pub fn derivative_profile(
    c: &CovPath,
    t_points: &[f64],
    cfg: &KernelConfig,
) -> Vec<Result<DerivEstimate>> {
    t_points
        .par_iter()
        .map(|&t| stochastic_derivative(c, t, cfg))
        .collect()
}

/// Derivative estimate at every grid node. Nodes where the schedule cannot
/// be resolved (the few nodes next to either end of the grid) carry the
/// value of the nearest resolved node.
pub fn node_profile(c: &CovPath, cfg: &KernelConfig) -> Result<Vec<f64>> {
    let n = c.grid().len();
    let raw: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| estimate_at_node(c, i, cfg).ok().map(|e| e.value))
        .collect();
    let first = raw
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| Error::Resolution("no grid node resolves the kernel schedule".into()))?;
    let mut out = Vec::with_capacity(n);
    let mut last = raw[first].unwrap();
    for v in raw {
        if let Some(v) = v {
            last = v;
        }
        out.push(last);
    }
    Ok(out)
}

/// Adapted derivative estimate at every node: the one-sided kernel
/// `3 / h^3 ∫_0^h r [C(t) - C(t - r)] dr` with `h = min(h0, t)`, which reads
/// `C` only up to `t`. The first few nodes, where fewer than
/// [`MIN_KERNEL_STEPS`] steps of history exist, take the value of the first
/// resolved node.
///
/// Use this profile, not the symmetric one, as an Itô integrand.
pub fn adapted_profile(c: &CovPath, cfg: &KernelConfig) -> Vec<f64> {
    let grid = c.grid();
    let dt = grid.dt();
    let v = c.values();
    let n = v.len();
    let quad = cfg.quadrature;
    let even = |m: usize| {
        if quad == Quadrature::Simpson {
            m - m % 2
        } else {
            m
        }
    };
    let full = even(grid.steps_for(cfg.h0).max(MIN_KERNEL_STEPS).min(n - 1));

    // Prefix sums of C_j and j C_j, over all j and over each parity of j.
    let mut p0 = vec![0.0; n + 1];
    let mut p1 = vec![0.0; n + 1];
    let mut q0 = vec![0.0; n + 2];
    let mut q1 = vec![0.0; n + 2];
    for j in 0..n {
        p0[j + 1] = p0[j] + v[j];
        p1[j + 1] = p1[j] + j as f64 * v[j];
        q0[j + 2] = q0[j] + v[j];
        q1[j + 2] = q1[j] + j as f64 * v[j];
    }
    // Σ_{j=lo}^{hi} (i - j) C_j, optionally over the j with j ≢ i (mod 2).
    let weighted = |i: usize, lo: usize, hi: usize| -> f64 {
        let fi = i as f64;
        fi * (p0[hi + 1] - p0[lo]) - (p1[hi + 1] - p1[lo])
    };
    let weighted_odd = |i: usize, lo: usize, hi: usize| -> f64 {
        // j = i - k with k odd: parity opposite to i.
        let lo = if (i - lo) % 2 == 1 { lo } else { lo + 1 };
        if lo > hi {
            return 0.0;
        }
        let hi = if (i - hi) % 2 == 1 { hi } else { hi - 1 };
        let fi = i as f64;
        fi * (q0[hi + 2] - q0[lo]) - (q1[hi + 2] - q1[lo])
    };
    let (wk, wk_odd) = {
        let mf = full as f64;
        let odd = (1..full).step_by(2).map(|k| k as f64).sum::<f64>();
        (0.5 * mf * (mf - 1.0), odd)
    };

    let mut out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let m = even(full.min(i));
            if m < MIN_KERNEL_STEPS {
                return f64::NAN;
            }
            let mf = m as f64;
            let acc = if m == full {
                let lo = i - m + 1;
                let lin = v[i] * wk - weighted(i, lo, i - 1);
                match quad {
                    Quadrature::Simpson => {
                        let odd = v[i] * wk_odd - weighted_odd(i, lo, i - 1);
                        (2.0 * lin + 2.0 * odd + mf * (v[i] - v[i - m])) / 3.0
                    }
                    Quadrature::Trapezoid => lin + 0.5 * mf * (v[i] - v[i - m]),
                }
            } else {
                left_kernel_sum(v, i, m, quad)
            };
            3.0 * acc / (mf * mf * mf * dt)
        })
        .collect();
    if let Some(first) = out.iter().position(|x| !x.is_nan()) {
        let fill = out[first];
        for x in out.iter_mut().take(first) {
            *x = fill;
        }
    }
    out
}

/// `∫_0^m k (C_i - C_{i-k}) dk` by quadrature on the grid, in steps.
fn left_kernel_sum(v: &[f64], i: usize, m: usize, quad: Quadrature) -> f64 {
    let mut acc = 0.0;
    match quad {
        Quadrature::Simpson => {
            for k in 1..m {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * k as f64 * (v[i] - v[i - k]);
            }
            acc += m as f64 * (v[i] - v[i - m]);
            acc / 3.0
        }
        Quadrature::Trapezoid => {
            for k in 1..m {
                acc += k as f64 * (v[i] - v[i - k]);
            }
            acc + 0.5 * m as f64 * (v[i] - v[i - m])
        }
    }
}

/// Index bounds of the strong-derivative window of half-width `m` at `i`.
fn strong_window(grid: &TimeGrid, t: f64, w: f64) -> Result<(usize, usize)> {
    let i = grid.snap(t)?;
    let n = grid.n_steps();
    let m = grid.steps_for(w);
    if m < MIN_STRONG_STEPS {
        return Err(Error::Resolution(format!(
            "window {w} spans {m} steps, need {MIN_STRONG_STEPS}"
        )));
    }
    let (lo, hi) = if i == 0 {
        (0, m.min(n))
    } else if i == n {
        (n - m.min(n), n)
    } else {
        let h = m.min(i).min(n - i);
        (i - h, i + h)
    };
    if hi - lo < MIN_STRONG_STEPS {
        return Err(Error::Resolution(format!(
            "window at t = {t} shrinks to {} steps at the grid boundary",
            hi - lo
        )));
    }
    Ok((lo, hi))
}

/// Strong derivative `dC/dt` by a central difference of half-width `w`
/// (forward at `t = 0`, backward at `t = t_end`).
pub fn strong_derivative(c: &CovPath, t: f64, w: f64) -> Result<f64> {
    let grid = c.grid();
    let (lo, hi) = strong_window(grid, t, w)?;
    let v = c.values();
    Ok((v[hi] - v[lo]) / ((hi - lo) as f64 * grid.dt()))
}

/// Quotients `(C(t ± ε) - C(t)) / (±ε)` over a shrinking `ε` schedule,
/// extrapolated linearly to `ε = 0`.
fn one_side(c: &CovPath, i: usize, room: usize, cfg: &KernelConfig, sign: f64) -> Result<f64> {
    let grid = c.grid();
    let dt = grid.dt();
    let v = c.values();
    let t = grid.node(i);
    let base = cfg.h0.min(room as f64 * dt);
    let mut eps = Vec::new();
    let mut q = Vec::new();
    let mut last_m = usize::MAX;
    for j in 0..cfg.levels {
        let m = grid.steps_for(base * 0.5f64.powi(j as i32)).min(room);
        if m == 0 || m == last_m {
            continue;
        }
        last_m = m;
        let other = if sign > 0.0 { i + m } else { i - m };
        eps.push(m as f64 * dt);
        q.push((v[other] - v[i]) / (sign * m as f64 * dt));
    }
    if q.len() < 2 {
        return Err(Error::Resolution(format!(
            "fewer than two one-sided levels at t = {t}"
        )));
    }
    let grows = |a: f64, b: f64| b.abs() > 2.0 * a.abs();
    let diverging = q.windows(3).any(|w| grows(w[0], w[1]) && grows(w[1], w[2]));
    if diverging || q.iter().any(|x| !x.is_finite()) {
        return Err(Error::Divergence { t });
    }
    let (a, _, _) = linear_fit(&eps, &q);
    if !a.is_finite() {
        return Err(Error::Divergence { t });
    }
    Ok(a)
}

/// Right and left derivatives of `c` at `t`.
pub fn one_sided(c: &CovPath, t: f64, cfg: &KernelConfig) -> Result<OneSidedDerivs> {
    let grid = c.grid();
    let i = grid.snap(t)?;
    let n = grid.n_steps();
    if i == n {
        return Err(Error::InvalidArgument(format!(
            "t = {t} is the right end of the grid; no right derivative"
        )));
    }
    let d_plus = one_side(c, i, n - i, cfg, 1.0)?;
    let d_minus = if i == 0 {
        None
    } else {
        Some(one_side(c, i, i, cfg, -1.0)?)
    };
    Ok(OneSidedDerivs { d_plus, d_minus })
}

/// Generalized derivative: the average of the one-sided derivatives in the
/// interior, the right derivative at `t = 0`.
///
/// In the interior the average is taken before the limit: symmetric
/// quotients `(C(t + ε) - C(t - ε)) / 2ε` equal the average of the two
/// one-sided quotients, their bias is even in `ε`, and they are
/// extrapolated in `ε^2`.
pub fn generalized_derivative(c: &CovPath, t: f64, cfg: &KernelConfig) -> Result<f64> {
    let sides = one_sided(c, t, cfg)?;
    let grid = c.grid();
    let i = grid.snap(t)?;
    if i == 0 {
        return Ok(sides.d_plus);
    }
    let dt = grid.dt();
    let v = c.values();
    let room = i.min(grid.n_steps() - i);
    let base = cfg.h0.min(room as f64 * dt);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last_m = usize::MAX;
    for j in 0..cfg.levels {
        let m = grid.steps_for(base * 0.5f64.powi(j as i32)).min(room);
        if m == 0 || m == last_m {
            continue;
        }
        last_m = m;
        let eps = m as f64 * dt;
        xs.push(eps * eps);
        ys.push((v[i + m] - v[i - m]) / (2.0 * eps));
    }
    if xs.len() < 2 {
        let minus = sides.d_minus.unwrap_or(sides.d_plus);
        return Ok(0.5 * (sides.d_plus + minus));
    }
    let (a, _, _) = linear_fit(&xs, &ys);
    Ok(a)
}

/// Strong derivative of `S` with respect to `S2 = f(B)`:
/// `d⟨S, S2⟩_t / d⟨S2⟩_t`, both rates taken over a central window of
/// half-width `h0`.
pub fn derivative_wrt_fb(
    s: &SemimartingalePath,
    f: &FunctionSpec,
    t: f64,
    cfg: &KernelConfig,
) -> Result<f64> {
    if !f.is_nonvanishing() {
        return Err(Error::Precondition(format!(
            "derivative of '{}' may vanish; f(B) is not a valid reference process",
            f.name()
        )));
    }
    let grid = s.grid();
    let i = grid.snap(t)?;
    if i == 0 || i == grid.n_steps() {
        return Err(Error::InvalidArgument(format!("t = {t} must be interior")));
    }
    let s2 = s.b.map(|b| f.f(b))?;
    let num = cross_variation(&s.s, &s2)?;
    let den_cov = quadratic_variation(&s2)?;
    let (lo, hi) = strong_window(grid, t, cfg.h0)?;
    let dt = grid.dt();
    let den = strong_derivative(&den_cov, t, cfg.h0)?;

    // Standard error of the mean per-step rate (ΔS2)^2 / dt over the window.
    let rates: Vec<f64> = den_cov.values()[lo..=hi]
        .windows(2)
        .map(|w| (w[1] - w[0]) / dt)
        .collect();
    let k = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / k;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (k - 1.0).max(1.0);
    let noise = (var / k).sqrt();
    if !(den > 10.0 * noise) {
        return Err(Error::IllConditioned {
            t: grid.node(i),
            denominator: den,
            noise,
        });
    }
    Ok(strong_derivative(&num, t, cfg.h0)? / den)
}
