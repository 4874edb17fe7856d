use alloc::string::String;
use core::fmt;

/// Failures raised by the evaluation context and the detectors built on it.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// More values were supplied than the context has slots.
    Capacity { len: usize, slots: usize },
    /// Two operands come from different contexts.
    ContextMismatch,
    /// A plaintext operand does not match the context slot count.
    LengthMismatch { expected: usize, found: usize },
    /// A multiplication would exceed the multiplicative depth budget.
    DepthOverflow { required: usize, budget: usize },
    /// A parameter is outside its valid domain.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Capacity { len, slots } => {
                write!(f, "{len} values do not fit into {slots} slots")
            }
            Error::ContextMismatch => f.write_str("operands belong to different evaluation contexts"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "plaintext has {found} slots, context expects {expected}")
            }
            Error::DepthOverflow { required, budget } => {
                write!(f, "multiplicative depth {required} exceeds budget {budget}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
