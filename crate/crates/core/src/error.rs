use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative solver ran out of budget. The best iterate found is kept.
    #[error("tolerance not met: {message}")]
    ToleranceNotMet {
        message: String,
        best_point: Vec<f64>,
        best_value: f64,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("ill-conditioned design: lambda_min/lambda_max = {ratio:.3e}")]
    IllConditionedDesign { ratio: f64 },

    /// A width solve hit a degenerate oracle answer. The trace holds the iterations completed so far.
    #[error("degenerate width solve at iteration {iteration}")]
    DegenerateWidth {
        iteration: usize,
        trace: Box<crate::estimators::EstimationTrace>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::IllConditionedDesign { .. } => 2,
            Error::ToleranceNotMet { .. } | Error::Numeric(_) | Error::DegenerateWidth { .. } => 3,
        }
    }
}
