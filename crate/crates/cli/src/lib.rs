//! Experiment runner behind the `brownderiv` command.

pub mod config;
pub mod error;
pub mod registry;
pub mod run;

pub use config::{ExperimentConfig, S2Kind, TPoints};
pub use error::{CliError, CliResult};
pub use run::{
    run_convergence, run_smvt, run_verify, ConvergenceOutcome, ConvergenceRow, SmvtOutcome,
    VerifyOutcome, CSV_HEADER,
};
