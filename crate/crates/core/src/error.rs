use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration detected before any work starts.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Caller violated an operation's precondition (shapes, modes, ordering).
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    /// Problem too large for exhaustive treatment.
    #[error("size limit exceeded: {0}")]
    Size(String),
    /// A metric that is not defined for the given inputs.
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
