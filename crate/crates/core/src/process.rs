//! Semimartingale paths `S = S0 + V + ∫X dB` built node by node on a grid.
//!
//! Integrands and drifts are supplied as [`ProcessSpec`] rules. A rule sees
//! the current node through a [`Node`] view whose history accessors refuse
//! any index past the node being evaluated, so adaptedness cannot be broken
//! by construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::paths::{RealPath, TimeGrid};

/// Read-only view of the state at node `index` and everything before it.
pub struct Node<'a> {
    index: usize,
    t: f64,
    b: &'a [f64],
    s: &'a [f64],
}

impl<'a> Node<'a> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Brownian value at the current node.
    pub fn b(&self) -> f64 {
        self.b[self.index]
    }

    /// Semimartingale value at the current node. While the drift itself is
    /// being evaluated this is the partial value `S0 + M`, since `V` at this
    /// node is not known yet.
    pub fn s(&self) -> f64 {
        self.s[self.index]
    }

    pub fn b_at(&self, j: usize) -> Result<f64> {
        self.check(j)?;
        Ok(self.b[j])
    }

    pub fn s_at(&self, j: usize) -> Result<f64> {
        self.check(j)?;
        Ok(self.s[j])
    }

    fn check(&self, j: usize) -> Result<()> {
        if j > self.index {
            Err(Error::Adaptedness {
                current: self.index,
                requested: j,
            })
        } else {
            Ok(())
        }
    }
}

type EvalFn = dyn Fn(&Node<'_>) -> Result<f64> + Send + Sync;

/// Adapted evaluation rule for an integrand `X` or a drift `V`.
#[derive(Clone)]
pub struct ProcessSpec {
    name: String,
    continuous: bool,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessSpec")
            .field("name", &self.name)
            .field("continuous", &self.continuous)
            .finish()
    }
}

impl ProcessSpec {
    /// General rule. `continuous` declares whether paths are a.s. continuous;
    /// it only decides which theorem a verification run claims to exercise.
    pub fn new(
        name: impl Into<String>,
        continuous: bool,
        eval: impl Fn(&Node<'_>) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            continuous,
            eval: Arc::new(eval),
        }
    }

    /// Rule depending on time only.
    pub fn of_time(
        name: impl Into<String>,
        continuous: bool,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, continuous, move |n| Ok(f(n.t())))
    }

    /// Rule depending on time and the current Brownian value.
    pub fn of_brownian(
        name: impl Into<String>,
        continuous: bool,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, continuous, move |n| Ok(f(n.t(), n.b())))
    }

    pub fn constant(c: f64) -> Self {
        Self::of_time(format!("const:{c}"), true, move |_| c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn evaluate(&self, node: &Node<'_>) -> Result<f64> {
        (self.eval)(node)
    }
}

/// Whether a scalar function is `C^1` with absolutely continuous derivative
/// or merely convex (then only the left derivative is meaningful).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    C1AbsCont,
    Convex,
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A scalar function together with its analytic derivative and left derivative.
#[derive(Clone)]
pub struct FunctionSpec {
    name: String,
    f: Arc<ScalarFn>,
    f_prime: Arc<ScalarFn>,
    f_left: Arc<ScalarFn>,
    kind: FunctionKind,
    nonvanishing: bool,
}

impl fmt::Debug for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("nonvanishing", &self.nonvanishing)
            .finish()
    }
}

impl FunctionSpec {
    /// Smooth function; the left derivative is `f_prime` itself.
    pub fn smooth(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        nonvanishing: bool,
    ) -> Self {
        let f_prime: Arc<ScalarFn> = Arc::new(f_prime);
        Self {
            name: name.into(),
            f: Arc::new(f),
            f_left: f_prime.clone(),
            f_prime,
            kind: FunctionKind::C1AbsCont,
            nonvanishing,
        }
    }

    /// Convex function given with its (non-decreasing) left derivative, which
    /// also serves as `f_prime` off the kink set.
    pub fn convex(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f_left: impl Fn(f64) -> f64 + Send + Sync + 'static,
        nonvanishing: bool,
    ) -> Self {
        let f_left: Arc<ScalarFn> = Arc::new(f_left);
        Self {
            name: name.into(),
            f: Arc::new(f),
            f_prime: f_left.clone(),
            f_left,
            kind: FunctionKind::Convex,
            nonvanishing,
        }
    }

    pub fn identity() -> Self {
        Self::smooth("identity", |x| x, |_| 1.0, true)
    }

    /// `x^p`. Integer exponents use repeated multiplication so negative
    /// arguments stay valid.
    pub fn power(p: f64) -> Self {
        let integer = p.fract() == 0.0 && p.abs() < i32::MAX as f64;
        let f = move |x: f64| {
            if integer {
                x.powi(p as i32)
            } else {
                x.powf(p)
            }
        };
        let df = move |x: f64| {
            if p == 0.0 {
                0.0
            } else if integer {
                p * x.powi(p as i32 - 1)
            } else {
                p * x.powf(p - 1.0)
            }
        };
        Self::smooth(format!("power:{p}"), f, df, p == 1.0)
    }

    pub fn abs() -> Self {
        Self::convex("abs", f64::abs, |x| if x > 0.0 { 1.0 } else { -1.0 }, true)
    }

    /// `max(x, 0)`, left derivative `1{x > 0}`.
    pub fn relu() -> Self {
        Self::convex(
            "relu",
            |x| x.max(0.0),
            |x| if x > 0.0 { 1.0 } else { 0.0 },
            false,
        )
    }

    pub fn exp() -> Self {
        Self::smooth("exp", f64::exp, f64::exp, true)
    }

    pub fn cubic() -> Self {
        Self::smooth("cubic", |x| x * x * x, |x| 3.0 * x * x, false)
    }

    pub fn affine(a: f64, b: f64) -> Self {
        Self::smooth(
            format!("affine:{a},{b}"),
            move |x| a * x + b,
            move |_| a,
            a != 0.0,
        )
    }

    /// Looks up a catalog name such as `exp`, `power:2` or `affine:2,0`.
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown function '{name}'"));
        let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        match name.split_once(':') {
            None => match name {
                "identity" => Ok(Self::identity()),
                "abs" => Ok(Self::abs()),
                "relu" => Ok(Self::relu()),
                "exp" => Ok(Self::exp()),
                "cubic" => Ok(Self::cubic()),
                _ => Err(bad()),
            },
            Some(("power", p)) => Ok(Self::power(number(p)?)),
            Some(("affine", args)) => {
                let (a, b) = args.split_once(',').ok_or_else(bad)?;
                Ok(Self::affine(number(a)?, number(b)?))
            }
            Some(_) => Err(bad()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    /// Whether the relevant derivative (`f'`, or `f'_-` for convex kinds)
    /// never vanishes.
    pub fn is_nonvanishing(&self) -> bool {
        self.nonvanishing
    }

    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn f_prime(&self, x: f64) -> f64 {
        (self.f_prime)(x)
    }

    pub fn f_left(&self, x: f64) -> f64 {
        (self.f_left)(x)
    }

    /// The derivative that appears in the chain rule for this kind.
    pub fn chain_derivative(&self, x: f64) -> f64 {
        match self.kind {
            FunctionKind::C1AbsCont => self.f_prime(x),
            FunctionKind::Convex => self.f_left(x),
        }
    }
}

/// Names of every entry in [`builtin_functions`]; parametric families are
/// listed with a representative parameter.
pub const BUILTIN_FUNCTION_NAMES: &[&str] = &[
    "identity",
    "power:<p>",
    "abs",
    "relu",
    "exp",
    "cubic",
    "affine:<a>,<b>",
];

/// Catalog of ready-made functions for chain-rule style checks.
pub fn builtin_functions() -> Vec<FunctionSpec> {
    vec![
        FunctionSpec::identity(),
        FunctionSpec::power(2.0),
        FunctionSpec::abs(),
        FunctionSpec::relu(),
        FunctionSpec::exp(),
        FunctionSpec::cubic(),
        FunctionSpec::affine(1.0, 0.0),
    ]
}

/// A semimartingale sampled on a grid together with its decomposition.
///
/// `s[i] = s0 + v[i] + m[i]` holds at every node, with `v[0] = m[0] = 0`.
/// `x` is the integrand of the martingale part, `m ≈ ∫x dB`.
#[derive(Debug, Clone)]
pub struct SemimartingalePath {
    pub s0: f64,
    pub b: RealPath,
    pub x: RealPath,
    pub v: RealPath,
    pub m: RealPath,
    pub s: RealPath,
    /// Declared continuity of `x` paths.
    pub continuous: bool,
}

impl SemimartingalePath {
    pub fn grid(&self) -> &TimeGrid {
        self.b.grid()
    }

    /// Wraps an already-computed path `s` whose martingale integrand is
    /// known analytically (e.g. `f(S)` with integrand `f'(S) X`, or an
    /// exponential martingale). The whole of `s - s0` is booked as the
    /// martingale part and `v` is zero.
    pub fn from_observed(b: RealPath, s: RealPath, x: RealPath, continuous: bool) -> Result<Self> {
        b.grid().check_same(s.grid())?;
        b.grid().check_same(x.grid())?;
        let s0 = s.values()[0];
        let m = s.map(|v| v - s0)?;
        let v = RealPath::constant(*b.grid(), 0.0)?;
        Ok(Self {
            s0,
            b,
            x,
            v,
            m,
            s,
            continuous,
        })
    }

    /// Largest violation of `s = s0 + v + m` over the grid.
    pub fn decomposition_residual(&self) -> f64 {
        self.s
            .values()
            .iter()
            .zip(self.v.values())
            .zip(self.m.values())
            .map(|((s, v), m)| (s - self.s0 - v - m).abs())
            .fold(0.0, f64::max)
    }
}

/// Left-endpoint (Itô) sums `M[k] = Σ_{i<k} X[i] (B[i+1] - B[i])`.
pub fn ito_integral(x: &RealPath, b: &RealPath) -> Result<RealPath> {
    x.grid().check_same(b.grid())?;
    let xs = x.values();
    let bs = b.values();
    let mut out = Vec::with_capacity(xs.len());
    let mut m = 0.0;
    out.push(m);
    for i in 0..xs.len() - 1 {
        m += xs[i] * (bs[i + 1] - bs[i]);
        out.push(m);
    }
    RealPath::new(*x.grid(), out)
}

/// Builds `S = S0 + V + ∫X dB` node by node. At node `i` the martingale part
/// is advanced from node `i - 1`, then `V[i]` is evaluated, then `X[i]`.
pub fn build_semimartingale(
    s0: f64,
    v_spec: &ProcessSpec,
    x_spec: &ProcessSpec,
    b: &RealPath,
) -> Result<SemimartingalePath> {
    if !s0.is_finite() {
        return Err(Error::InvalidArgument(format!("S0 = {s0} is not finite")));
    }
    let grid = *b.grid();
    let bs = b.values();
    let n = bs.len();
    let mut x = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut mart = 0.0;

    for i in 0..n {
        if i > 0 {
            mart += x[i - 1] * (bs[i] - bs[i - 1]);
        }
        m.push(mart);
        let t = grid.node(i);

        s.push(s0 + mart);
        let vi = v_spec.evaluate(&Node {
            index: i,
            t,
            b: bs,
            s: &s,
        })?;
        if !vi.is_finite() {
            return Err(Error::NumericDomain {
                index: i,
                what: format!("V evaluated to {vi}"),
            });
        }
        if i == 0 && vi != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "V must vanish at t = 0, got {vi}"
            )));
        }
        v.push(vi);
        s[i] = s0 + vi + mart;
        if !s[i].is_finite() {
            return Err(Error::NumericDomain {
                index: i,
                what: format!("S reached {}", s[i]),
            });
        }

        let xi = x_spec.evaluate(&Node {
            index: i,
            t,
            b: bs,
            s: &s,
        })?;
        if !xi.is_finite() {
            return Err(Error::NumericDomain {
                index: i,
                what: format!("X evaluated to {xi}"),
            });
        }
        x.push(xi);
    }

    Ok(SemimartingalePath {
        s0,
        b: b.clone(),
        x: RealPath::new(grid, x)?,
        v: RealPath::new(grid, v)?,
        m: RealPath::new(grid, m)?,
        s: RealPath::new(grid, s)?,
        continuous: x_spec.is_continuous(),
    })
}

/// Discrete exponential martingale
/// `Ξ[k] = exp(Σ_{i<k} X[i] ΔB[i] - ½ Σ_{i<k} X[i]² dt)`.
pub fn exponential_martingale(x: &RealPath, b: &RealPath) -> Result<RealPath> {
    x.grid().check_same(b.grid())?;
    let dt = x.grid().dt();
    let xs = x.values();
    let bs = b.values();
    let mut out = Vec::with_capacity(xs.len());
    let mut stoch = 0.0;
    let mut comp = 0.0;
    out.push(1.0);
    for i in 0..xs.len() - 1 {
        stoch += xs[i] * (bs[i + 1] - bs[i]);
        comp += xs[i] * xs[i] * dt;
        let xi = (stoch - 0.5 * comp).exp();
        if !xi.is_finite() || xi <= 0.0 {
            return Err(Error::NumericDomain {
                index: i + 1,
                what: format!(
                    "exponential martingale left (0, inf): exp({})",
                    stoch - 0.5 * comp
                ),
            });
        }
        out.push(xi);
    }
    RealPath::new(*x.grid(), out)
}
