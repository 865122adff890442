use alloc::string::String;

/// Errors raised by estimation, bootstrap and diagnostics routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Input data are malformed (non-finite values, shape mismatches).
    #[error("invalid input: {0}")]
    Input(String),

    /// A kernel was evaluated outside its domain.
    #[error("kernel domain error: {0}")]
    Domain(String),

    /// The Bernoulli design sampled no tuple, or could not be realized.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// An estimated variance diagonal is numerically zero.
    #[error("degenerate variance at coordinate {coordinate}: lambda = {value:e}")]
    DegenerateVariance { coordinate: usize, value: f64 },

    /// Exhaustive enumeration would exceed the configured cap.
    #[error("refused enumeration of {requested} items (cap {cap})")]
    RefusedEnumeration { requested: String, cap: u64 },

    /// A dense buffer would exceed the configured memory cap.
    #[error("memory cap exceeded: {entries} entries requested, cap {cap}")]
    MemoryCap { entries: u128, cap: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
