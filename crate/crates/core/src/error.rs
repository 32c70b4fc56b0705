use thiserror::Error;

/// Errors produced by the reduction, selection and experiment routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge within {iterations} iterations")]
    SvdNonConvergence { iterations: usize },

    #[error("SVD singular values inconsistent with the Frobenius norm (relative gap {relative_gap:e})")]
    SvdInconsistent { relative_gap: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("requested dimension {requested} exceeds numerical rank {rank}")]
    Rank { requested: usize, rank: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("overflow while evaluating the nonlinear term")]
    Overflow,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SvdNonConvergence { .. }
                | Error::SvdInconsistent { .. }
                | Error::Singular(_)
                | Error::Rank { .. }
                | Error::Hypothesis(_)
                | Error::NonConvergence { .. }
                | Error::Overflow
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
