//! Command-line front end for the secbill simulations.
//!
//! The binary `secbill` is a thin wrapper over the functions here, so the
//! integration tests can drive the same code paths.

pub mod checks;
pub mod output;
pub mod run;
pub mod scenario;
pub mod svg;
pub mod sweep;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] secbill_core::Error),
}

impl CliError {
    pub fn outcome(&self) -> Outcome {
        match self {
            CliError::Config(_) | CliError::Model(secbill_core::Error::InvalidParameter(_)) => Outcome::ConfigError,
            _ => Outcome::Failure,
        }
    }
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Failure,
    ConfigError,
    SingularityStop,
    Degeneracy,
    CheckFailure,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Failure => 1,
            Outcome::ConfigError => 2,
            Outcome::SingularityStop => 3,
            Outcome::Degeneracy => 4,
            Outcome::CheckFailure => 5,
        }
    }

    pub fn from_code(code: i32) -> Self {
        match code {
            0 => Outcome::Pass,
            2 => Outcome::ConfigError,
            3 => Outcome::SingularityStop,
            4 => Outcome::Degeneracy,
            5 => Outcome::CheckFailure,
            _ => Outcome::Failure,
        }
    }
}
