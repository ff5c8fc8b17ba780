use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is defined, but not for this configuration.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An adaptive integration ran out of budget before reaching its tolerance.
    #[error(
        "no convergence: best estimate {estimate:e} with error bound {error_bound:e} ({context})"
    )]
    NonConvergence {
        estimate: f64,
        error_bound: f64,
        context: String,
    },

    #[error("parameter not identifiable: {0}")]
    Unidentifiable(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Whether the failure is numerical rather than a bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Degenerate(_))
    }
}
