use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes, grouped so front ends can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid parameters violate their preconditions.
    #[error("invalid grid: {0}")]
    Grid(String),
    /// Malformed or out-of-range user input (recipes, observables, orders).
    #[error("invalid input: {0}")]
    Input(String),
    /// A numerical precondition does not hold for the data at hand.
    #[error("numerical precondition failed: {0}")]
    Precondition(String),
    /// An internal consistency check failed after computing a result.
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True for errors caused by bad configuration rather than by the numbers.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Grid(_) | Error::Input(_))
    }
}
