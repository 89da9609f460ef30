use std::path::PathBuf;

use mel_core::MelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] MelError),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// Summaries disagree on which cells they cover.
    #[error("missing cells: {}", .0.join(", "))]
    MissingCells(Vec<String>),

    /// A trace broke at least one invariant.
    #[error("{} invariant violation(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    Violations(Vec<String>),
}

impl CliError {
    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Parse { path: path.into(), message: message.into() }
    }

    /// 2 parse error, 3 infeasible, 4 solver non-convergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Model(e) => model_exit_code(e),
            _ => 1,
        }
    }
}

pub fn model_exit_code(e: &MelError) -> i32 {
    match e {
        MelError::InvalidInput(_) => 2,
        e if e.is_infeasible() => 3,
        MelError::NonConvergence { .. } | MelError::Unbounded { .. } | MelError::DegenerateDual => 4,
        _ => 1,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
