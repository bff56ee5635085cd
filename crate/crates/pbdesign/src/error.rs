use thiserror::Error;

/// Errors produced by design construction, information computations and
/// design search.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("treatment label {label} outside 1..={t}")]
    LabelOutOfRange { label: u32, t: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The random-effect covariance is singular, so the partitioned-matrix
    /// route is unavailable (requires sigma2 > 0 and sigmab2 > 0).
    #[error("singular random-effect covariance: {0}")]
    SingularG(String),

    #[error("no feasible design found")]
    NoFeasibleDesign,

    #[error("enumeration would visit {classes} design classes, above the cap of {cap}")]
    CapExceeded { classes: u128, cap: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
