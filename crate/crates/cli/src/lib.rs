//! Library side of the `causal-shap` command: configuration, the external
//! predictor protocol and the run pipeline.

pub mod config;
pub mod external;
pub mod run;
pub mod sweeps;

use thiserror::Error;

/// Failures surfaced to the command line, each with its exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("predictor failure: {0}")]
    Predictor(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Predictor(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<causal_shap::Error> for CliError {
    fn from(e: causal_shap::Error) -> Self {
        match e {
            causal_shap::Error::Predictor(p) => CliError::Predictor(p.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<causal_shap::PredictError> for CliError {
    fn from(e: causal_shap::PredictError) -> Self {
        CliError::Predictor(e.to_string())
    }
}
