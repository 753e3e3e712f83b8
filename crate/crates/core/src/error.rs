use thiserror::Error;

use crate::ambiguity::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("linear program failed at {context}: {source}")]
    Lp {
        context: String,
        #[source]
        source: LpError,
    },

    /// The tightened OCP could not satisfy constraint row `row` at step `step`.
    #[error(
        "tightened problem infeasible at step {step}, constraint row {row} \
         (violation {violation:.3e}){}",
        outer_iteration.map(|k| format!(" during outer iteration {k}")).unwrap_or_default()
    )]
    Infeasible {
        step: usize,
        row: usize,
        violation: f64,
        outer_iteration: Option<usize>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
