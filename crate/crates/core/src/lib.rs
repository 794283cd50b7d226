//! Pathwise stochastic derivative of continuous semimartingales with respect
//! to Brownian motion.
//!
//! The derivative of `S` at `t` is read off the covariation `⟨S, B⟩` through
//! a symmetric averaging kernel (see [`sderiv`]). The crate builds Brownian
//! paths and semimartingales on uniform grids, estimates covariations, and
//! ships executable checks for the calculus rules the derivative obeys.

pub mod covariation;
pub mod error;
pub mod paths;
pub mod process;
pub mod rules;
pub mod sderiv;
pub mod stats;

pub use covariation::{covariation_with_bm, cross_variation, quadratic_variation, CovPath};
pub use error::{Error, Result};
pub use paths::{derive_stream, make_grid, sample_brownian, PathSeed, RealPath, TimeGrid};
pub use process::{
    build_semimartingale, builtin_functions, exponential_martingale, ito_integral, FunctionKind,
    FunctionSpec, ProcessSpec, SemimartingalePath, BUILTIN_FUNCTION_NAMES,
};
pub use rules::{SmvtResult, VerifyOptions, VerifyReport, RULE_NAMES};
pub use sderiv::{
    adapted_profile, derivative_profile, derivative_wrt_fb, generalized_derivative, one_sided,
    stochastic_derivative, stochastic_difference, strong_derivative, DerivEstimate, KernelConfig,
    OneSidedDerivs, Quadrature,
};
