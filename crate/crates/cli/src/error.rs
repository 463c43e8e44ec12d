use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod code {
    pub const OK: i32 = 0;
    /// Malformed command line (reported by the argument parser).
    pub const USAGE: i32 = 2;
    /// Unreadable or undecodable input file.
    pub const INPUT: i32 = 3;
    /// The image (or its band) carries no gray mass.
    pub const EMPTY_IMAGE: i32 = 4;
    /// Inconsistent flags or parameter values.
    pub const CONFIG: i32 = 5;
    /// Numeric failure inside the engine, or no structure found.
    pub const NUMERIC: i32 = 6;
    /// Output could not be written.
    pub const OUTPUT: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {msg}")]
    Input { path: PathBuf, msg: String },

    #[error("{0}")]
    Config(String),

    #[error("cannot write {path}: {msg}")]
    Output { path: PathBuf, msg: String },

    #[error(transparent)]
    Engine(#[from] thickline::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn input(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        CliError::Input {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    pub fn output(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        CliError::Output {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use thickline::Error as E;
        match self {
            CliError::Input { .. } => code::INPUT,
            CliError::Config(_) => code::CONFIG,
            CliError::Output { .. } => code::OUTPUT,
            CliError::Engine(e) => match e {
                E::EmptyImage | E::EmptyBand => code::EMPTY_IMAGE,
                E::InvalidParameter(_) => code::CONFIG,
                E::DegeneratePolynomial | E::CollapsedComponent(_) | E::NoStructureDetected | E::NonFinite { .. } => {
                    code::NUMERIC
                }
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
