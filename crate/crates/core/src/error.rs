use thiserror::Error;

/// Errors produced by the solver, the channel generators and the analytic
/// formulas.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RisError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vector norm {norm:e} is below the zero threshold {eps:e}")]
    ZeroVector { norm: f64, eps: f64 },

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("angle {0} rad outside (-pi/2, pi/2)")]
    AngleOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("degenerate group {group}: {reason}")]
    DegenerateGroup { group: usize, reason: String },

    #[error("degenerate element {index}: |h_IT2| = {magnitude:e}")]
    DegenerateElement { index: usize, magnitude: f64 },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("gamma-ratio argument must be positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("the LoS formula is only available for two operators, got L = {0}")]
    UnsupportedOperatorCount(usize),

    #[error("group size {gs} is below the threshold tau = {tau}")]
    GroupSizeTooSmall { gs: usize, tau: usize },

    #[error("constraint matrix is numerically zero")]
    ZeroConstraint,

    #[error("block {0} of the reduced scattering matrix is not unitary")]
    NotUnitaryInput(usize),

    #[error("scaling fit needs at least 3 distinct N values, got {0}")]
    InsufficientPoints(usize),

    #[error("scaling fit needs strictly positive powers (N = {0})")]
    NonPositivePower(usize),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl RisError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        RisError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for RisError {
    fn from(e: std::io::Error) -> Self {
        RisError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RisError>;
