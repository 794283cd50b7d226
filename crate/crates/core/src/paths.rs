//! Uniform time grids, real-valued sample paths on them, and reproducible
//! Brownian path generation.
//!
//! Every path is driven by its own ChaCha20 stream. The 64-bit root seed is
//! written verbatim into the cipher key and the stream index selects the
//! cipher's stream counter, so `(root_seed, stream_index)` maps injectively
//! onto generator states and paths can be produced in any order or in
//! parallel with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Upper bound (exclusive) on stream indices.
pub const MAX_STREAMS: u64 = 1 << 32;

/// Uniform discretization `0 = t_0 < t_1 < ... < t_n = t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_end must be positive and finite, got {t_end}"
            )));
        }
        if n_steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_steps must be at least 2, got {n_steps}"
            )));
        }
        Ok(Self {
            t_end,
            n_steps,
            dt: t_end / n_steps as f64,
        })
    }

    /// Grid with step as close to `dt` as an integer step count allows.
    pub fn with_step(t_end: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        let n = (t_end / dt).round();
        if !(n.is_finite() && n >= 2.0 && n < usize::MAX as f64) {
            return Err(Error::InvalidArgument(format!(
                "t_end / dt = {n} does not give a usable step count"
            )));
        }
        Self::new(t_end, n as usize)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of node `i`; the last node is `t_end` exactly.
    pub fn node(&self, i: usize) -> f64 {
        if i >= self.n_steps {
            self.t_end
        } else {
            i as f64 * self.dt
        }
    }

    /// Index of the grid node nearest to `t`.
    pub fn snap(&self, t: f64) -> Result<usize> {
        let slack = 0.5 * self.dt;
        if !t.is_finite() || t < -slack || t > self.t_end + slack {
            return Err(Error::InvalidArgument(format!(
                "t = {t} lies outside [0, {}]",
                self.t_end
            )));
        }
        Ok(((t / self.dt).round().max(0.0) as usize).min(self.n_steps))
    }

    /// Number of whole steps nearest to a duration `h`.
    pub fn steps_for(&self, h: f64) -> usize {
        (h / self.dt).round().max(0.0) as usize
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.node(i))
    }

    pub(crate) fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "grid mismatch: (t_end {}, n {}) vs (t_end {}, n {})",
                self.t_end, self.n_steps, other.t_end, other.n_steps
            )))
        }
    }
}

pub fn make_grid(t_end: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(t_end, n_steps)
}

/// Finite real values at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl RealPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "path has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericDomain {
                index,
                what: format!("path value {}", values[index]),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Value at the node nearest to `t`.
    pub fn at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.grid.snap(t)?])
    }

    /// Node-wise image under `f`; fails if `f` leaves the reals.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Node-wise combination of two paths on the same grid.
    pub fn zip_with(&self, other: &RealPath, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &RealPath, b: f64) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub root_seed: u64,
    pub stream_index: u64,
}

impl PathSeed {
    pub fn new(root_seed: u64) -> Self {
        Self {
            root_seed,
            stream_index: 0,
        }
    }

    fn rng(&self) -> ChaCha20Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.root_seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Seed for the `k`-th independent stream under the same root.
pub fn derive_stream(seed: PathSeed, k: u64) -> Result<PathSeed> {
    if k >= MAX_STREAMS {
        return Err(Error::InvalidArgument(format!(
            "stream index {k} is not below 2^32"
        )));
    }
    Ok(PathSeed {
        root_seed: seed.root_seed,
        stream_index: k,
    })
}

/// Standard Brownian motion sampled on `grid`, with `B_0 = 0` and
/// independent `N(0, dt)` increments drawn from the seed's stream.
pub fn sample_brownian(grid: &TimeGrid, seed: PathSeed) -> RealPath {
    let mut rng = seed.rng();
    let sd = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    let mut b = 0.0;
    values.push(b);
    for _ in 0..grid.n_steps() {
        let z: f64 = StandardNormal.sample(&mut rng);
        b += sd * z;
        values.push(b);
    }
    RealPath {
        grid: *grid,
        values,
    }
}
