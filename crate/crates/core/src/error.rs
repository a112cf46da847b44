use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("descriptor parse error: {0}")]
    Parse(String),

    /// A search or prediction procedure ran out of its stated budget in a way
    /// that is an error rather than a reportable outcome (e.g. a consistent-set
    /// predictor asked for more productive programs than the fuel admits).
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("cache corruption: {0}")]
    CacheCorruption(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
