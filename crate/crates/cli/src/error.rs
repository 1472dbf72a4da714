use std::fmt;

use eslr_core::EsError;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable configuration, or an unwritable output.
    Config(String),
    /// The computation hit the limits of floating point.
    Numerical(String),
    /// A result violated a property that holds by construction.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical abort: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violation: {m}"),
        }
    }
}

impl From<EsError> for CliError {
    fn from(e: EsError) -> Self {
        match e {
            EsError::InvalidConfig { .. } | EsError::InvalidArgument { .. } => CliError::Config(e.to_string()),
            EsError::NonFiniteObjective { .. } | EsError::PrecisionExhausted { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

pub fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Invariant(what()))
    }
}
