use thiserror::Error;

/// Errors raised by the algorithm, the objectives and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EsError {
    /// A configuration field violates its contract.
    #[error("invalid configuration `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// An argument to an operation violates its precondition.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// The objective returned NaN or an infinity at a candidate.
    #[error("objective returned non-finite value {value} at candidate {index}")]
    NonFiniteObjective { index: usize, value: f64 },

    /// Candidate f-values fell into the subnormal range, so their ranking is
    /// no longer meaningful in double precision.
    #[error("objective values underflowed to the subnormal range at iteration {k}")]
    PrecisionExhausted { k: u64 },
}

impl EsError {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        EsError::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn argument(name: &'static str, reason: impl Into<String>) -> Self {
        EsError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EsError>;
