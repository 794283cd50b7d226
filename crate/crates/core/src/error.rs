use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A kernel window, difference window or interval is narrower than the grid can resolve.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("non-finite value at node {index}: {what}")]
    NumericDomain { index: usize, what: String },

    /// A process rule asked for a node beyond the one currently being evaluated.
    #[error("adaptedness violation: node {requested} read while evaluating node {current}")]
    Adaptedness { current: usize, requested: usize },

    /// One-sided difference quotients blew up instead of settling.
    #[error("one-sided derivative diverges at t = {t}")]
    Divergence { t: f64 },

    #[error("ill-conditioned ratio at t = {t}: denominator {denominator:e} below 10x noise floor {noise:e}")]
    IllConditioned {
        t: f64,
        denominator: f64,
        noise: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "mean value point not found on [{a}, {b}]: best residual {residual} exceeds {tolerance}"
    )]
    SmvtViolation {
        a: f64,
        b: f64,
        residual: f64,
        tolerance: f64,
    },
}
