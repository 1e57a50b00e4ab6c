use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported Daubechies order {0} (supported: 1..=8)")]
    UnsupportedOrder(usize),

    #[error("scaling function construction failed: {0}")]
    Construction(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("sample too small: need at least {needed} observations, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("wavelet spec mismatch between coordinate maps")]
    SpecMismatch,

    #[error("enumeration of {tuples} tuples exceeds budget of {budget}")]
    BudgetExceeded { tuples: u64, budget: u64 },

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("convergence rate is inoperable in this regime")]
    InoperableRegime,
}
