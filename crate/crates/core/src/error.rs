use thiserror::Error;

/// Which per-learner budget a feasibility failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Time,
    Energy,
    Batch,
}

impl std::fmt::Display for Budget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Budget::Time => write!(f, "time"),
            Budget::Energy => write!(f, "energy"),
            Budget::Batch => write!(f, "batch"),
        }
    }
}

#[derive(Debug, Error)]
pub enum MelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("learner {learner} infeasible ({budget}): {reason}")]
    LearnerInfeasible {
        learner: usize,
        budget: Budget,
        reason: String,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {reason} (iterations {iterations}, residual {residual:.3e})")]
    NonConvergence {
        reason: String,
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("dual problem unbounded: objective exceeded {cap:.3e}")]
    Unbounded { cap: f64 },

    #[error("degenerate dual: quadratic block vanished while the linear block did not")]
    DegenerateDual,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("search space too large: {points} points exceeds limit {limit}")]
    SearchTooLarge { points: u128, limit: u128 },
}

impl MelError {
    /// True for errors that mean "no allocation exists" rather than a solver or input fault.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            MelError::Infeasible(_) | MelError::LearnerInfeasible { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, MelError>;
