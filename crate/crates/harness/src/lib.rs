//! Experiment harness for the stochastic-calculus library: JSON-configured
//! Monte Carlo runs, built-in test functions, spec diagnostics, and CSV/JSON
//! report emission. The `itocalc` binary is a thin CLI over [`runner::run`].

pub mod builtins;
pub mod config;
pub mod report;
pub mod runner;
pub mod speccheck;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown builtin '{0}'")]
    UnknownName(String),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Formula(#[from] itocalc::ItoFormulaError),
    #[error(transparent)]
    Bv2d(#[from] itocalc::Bv2dError),
    #[error(transparent)]
    Path(#[from] itocalc::PathError),
    #[error(transparent)]
    Mollifier(#[from] itocalc::MollifierError),
}
