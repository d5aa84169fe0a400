//! Data loading, evaluation and experiment driver for `spectral-impute`.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fixtures;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use eval::EvalResult;
pub use experiment::{run_experiment, Report};
