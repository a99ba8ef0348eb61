use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke a documented precondition (e.g. an RB outside the slice set).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),
}
