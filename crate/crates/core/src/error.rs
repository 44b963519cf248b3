use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid interval [{start}, {end}]")]
    InvalidInterval { start: f64, end: f64 },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("instance has no inner snippets: [{start}, {end}] in a video of {len} snippets")]
    EmptyInner { start: f64, end: f64, len: usize },

    #[error("group is empty")]
    EmptyGroup,

    #[error("group mixes classes {0} and {1}")]
    MixedClasses(usize, usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("confidence must be positive, got {0}")]
    NonPositiveConfidence(f64),

    #[error("linear program failed: {0}")]
    Lp(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
