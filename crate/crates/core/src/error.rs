use thiserror::Error;

use crate::rational::Rational;

/// Errors raised by the transport library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotError {
    #[error("measures are not in convex order (step {step})")]
    NotInConvexOrder { step: usize },
    #[error("measures are not in positive convex order")]
    NotInPositiveConvexOrder,
    #[error("subtraction leaves a negative weight at {at}")]
    NegativeWeight { at: Rational },
    #[error("negative weight {weight} at {at}")]
    InvalidWeight { at: Rational, weight: Rational },
    #[error("marginal {t} of the path measure does not match")]
    MarginalMismatch { t: usize },
    #[error("path measure is not a martingale at step {t}, prefix {prefix:?}")]
    NotMartingale { t: usize, prefix: Vec<Rational> },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("construction needs {needed} paths, above the cap of {cap}")]
    PathCapExceeded { needed: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("reward cannot be evaluated exactly: {0}")]
    InexactReward(String),
    #[error("parse error at {pointer}: {message}")]
    Parse { pointer: String, message: String },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, MotError>;

impl MotError {
    pub(crate) fn parse(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        MotError::Parse {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
