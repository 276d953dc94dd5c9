use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The model violates a structural invariant.
    #[error("invalid model: {0}")]
    Invalid(String),
    /// The operation does not apply to this value function or chain variant.
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("automaton is not recurrent: {0}")]
    NotRecurrent(String),
    /// A configured size or step budget was exhausted.
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
