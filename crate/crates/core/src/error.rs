use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate layout: {0}")]
    DegenerateLayout(String),

    #[error("timing inconsistent with geometry: {0}")]
    InconsistentTiming(String),

    #[error("one-time pad exhausted: need {needed} bits, {available} left")]
    OtpExhausted { needed: usize, available: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for failures of the simulator itself rather than of its input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
