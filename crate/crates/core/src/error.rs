use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its legal range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// Two values that must agree (state length, node roles, ...) do not.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The request exceeds an exhaustive-computation bound.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A network, config or checkpoint document could not be decoded.
    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
