use thiserror::Error;

/// Failure classes shared by every module. The CLI maps them onto stable
/// exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied something outside an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A numerical procedure failed or produced a value violating its own
    /// postcondition.
    #[error("computation failed: {0}")]
    Computation(String),
    /// A checked property (packing validity, inequality, bound) does not hold.
    #[error("violation: {0}")]
    Violation(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn computation(msg: impl Into<String>) -> Self {
        Error::Computation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::Computation(_) => 3,
            Error::Violation(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::input(format!(
            "{what} has length {got}, expected dimension {expected}"
        )));
    }
    Ok(())
}
