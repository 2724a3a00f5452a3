use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("propensity score {value} of unit {unit} is not strictly inside (0, 1)")]
    PropensityOutOfRange { unit: usize, value: f64 },

    #[error("treatment is perfectly separated by the covariates; the MLE does not exist, use a penalized model")]
    Separation,

    #[error("information matrix is singular")]
    Singular,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero spread in {0}")]
    Degenerate(&'static str),

    #[error("malformed text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}
