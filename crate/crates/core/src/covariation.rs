//! Realized quadratic (co)variation on the grid's own partition.

use crate::error::{Error, Result};
use crate::paths::{RealPath, TimeGrid};
use crate::process::SemimartingalePath;

/// Cumulative cross-variation at every node, starting from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CovPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl CovPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "covariation has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "covariation must start at 0, got {}",
                values[0]
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericDomain {
                index,
                what: format!("covariation value {}", values[index]),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples a deterministic curve `c` with `c(0) = 0` at the grid nodes.
    pub fn from_fn(grid: TimeGrid, c: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(c).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.grid.snap(t)?])
    }
}

/// `values[k] = Σ_{i<k} (P[i+1] - P[i]) (Q[i+1] - Q[i])`.
pub fn cross_variation(p: &RealPath, q: &RealPath) -> Result<CovPath> {
    p.grid().check_same(q.grid())?;
    let ps = p.values();
    let qs = q.values();
    let mut out = Vec::with_capacity(ps.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 0..ps.len() - 1 {
        acc += (ps[i + 1] - ps[i]) * (qs[i + 1] - qs[i]);
        out.push(acc);
    }
    CovPath::new(*p.grid(), out)
}

pub fn quadratic_variation(p: &RealPath) -> Result<CovPath> {
    cross_variation(p, p)
}

/// Observed `⟨S, B⟩` and its theoretical counterpart `∫_0^t X ds`.
#[derive(Debug, Clone)]
pub struct CovariationWithBm {
    pub estimate: CovPath,
    /// Left-endpoint sums `Σ_{i<k} X[i] dt`.
    pub reference: CovPath,
}

impl CovariationWithBm {
    pub fn max_abs_error(&self) -> f64 {
        self.estimate
            .values()
            .iter()
            .zip(self.reference.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn covariation_with_bm(s: &SemimartingalePath) -> Result<CovariationWithBm> {
    let estimate = cross_variation(&s.s, &s.b)?;
    let dt = s.grid().dt();
    let xs = s.x.values();
    let mut reference = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    reference.push(acc);
    for &x in &xs[..xs.len() - 1] {
        acc += x * dt;
        reference.push(acc);
    }
    Ok(CovariationWithBm {
        estimate,
        reference: CovPath::new(*s.grid(), reference)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{derive_stream, make_grid, sample_brownian, PathSeed};
    use crate::process::{build_semimartingale, ProcessSpec};

    #[test]
    fn constant_paths_have_zero_covariation() {
        let g = make_grid(1.0, 100).unwrap();
        let c = RealPath::constant(g, 3.5).unwrap();
        assert!(cross_variation(&c, &c)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_variation_of_bm_is_time() {
        let g = make_grid(1.0, 100_000).unwrap();
        let b = sample_brownian(&g, PathSeed::new(3));
        let qv = quadratic_variation(&b).unwrap();
        assert!((qv.last() - 1.0).abs() <= 0.02);
        assert!(qv.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn smooth_path_is_orthogonal_to_bm() {
        let g = make_grid(1.0, 100_000).unwrap();
        let b = sample_brownian(&g, PathSeed::new(4));
        let v = RealPath::from_fn(g, |t| t * t).unwrap();
        assert!(cross_variation(&v, &b).unwrap().last().abs() <= 1e-2);
    }

    #[test]
    fn covariation_with_bm_tracks_time_for_unit_integrand() {
        let g = make_grid(1.0, 100_000).unwrap();
        let b = sample_brownian(&g, PathSeed::new(5));
        let s = build_semimartingale(0.0, &ProcessSpec::zero(), &ProcessSpec::constant(1.0), &b)
            .unwrap();
        let cov = covariation_with_bm(&s).unwrap();
        let max_err = cov
            .estimate
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - g.node(i)).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 0.02, "{max_err}");
        assert!(cov.max_abs_error() <= 0.02);
    }

    #[test]
    fn orthogonal_drift_only() {
        let g = make_grid(1.0, 100_000).unwrap();
        let b = sample_brownian(&g, derive_stream(PathSeed::new(5), 9).unwrap());
        let v = ProcessSpec::of_time("sin", true, |t| (3.0 * t).sin());
        let s = build_semimartingale(1.0, &v, &ProcessSpec::zero(), &b).unwrap();
        assert!(covariation_with_bm(&s).unwrap().estimate.last().abs() <= 1e-2);
    }

    #[test]
    fn occupation_time_for_indicator() {
        let g = make_grid(1.0, 100_000).unwrap();
        let b = sample_brownian(&g, PathSeed::new(6));
        let x = ProcessSpec::of_brownian("ind", false, |_, b| if b > 0.0 { 1.0 } else { 0.0 });
        let s = build_semimartingale(0.0, &ProcessSpec::zero(), &x, &b).unwrap();
        let cov = covariation_with_bm(&s).unwrap();
        let mut occ = 0.0;
        let mut max_err: f64 = 0.0;
        for k in 0..=g.n_steps() {
            max_err = max_err.max((cov.estimate.values()[k] - occ).abs());
            if b.values()[k] > 0.0 {
                occ += g.dt();
            }
        }
        assert!(max_err <= 0.03, "{max_err}");
    }

    #[test]
    fn covpath_invariants() {
        let g = make_grid(1.0, 10).unwrap();
        assert!(CovPath::from_fn(g, |t| t + 1.0).is_err());
        assert!(CovPath::new(g, vec![0.0; 5]).is_err());
        assert!(CovPath::from_fn(g, |t| t * t).is_ok());
    }
}
