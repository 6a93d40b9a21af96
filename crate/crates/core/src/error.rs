use thiserror::Error;

/// Errors raised by the rotation, energy and catalog routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not invertible (det = {det:e})")]
    NonInvertible { det: f64 },

    #[error("matrix has negative determinant (det = {det:e})")]
    NegativeDeterminant { det: f64 },

    #[error("matrix is not a proper rotation (orthogonality defect {defect:e}, det = {det})")]
    NotARotation { defect: f64, det: f64 },

    #[error("quaternion is zero")]
    ZeroQuaternion,

    #[error("singular values must be positive, got {0:?}")]
    NonPositiveSigma([f64; 3]),

    #[error("singular values must be sorted descending, got {0:?} (sort them first)")]
    UnorderedSigma([f64; 3]),

    #[error("singular values are not distinct, got {0:?}")]
    NonDistinctSigma([f64; 3]),

    #[error("critical branch {0} is not real-valued at these singular values")]
    UndefinedBranch(String),

    #[error(
        "material parameters are in the classical range (mu_c >= mu); no finite rescaling exists"
    )]
    ClassicalRegime,

    #[error("operation needs 0 < mu_c < mu")]
    NotStrictlyNonClassical,

    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },

    #[error("invalid material parameters mu = {mu}, mu_c = {muc}: need mu > 0 and mu_c >= 0")]
    InvalidParams { mu: f64, muc: f64 },

    #[error("gave up after {0} rejected proposals")]
    ExhaustedAttempts(usize),

    #[error("minimal selection is undercut by branch {branch} ({energy} < {selected})")]
    SelectionNotMinimal {
        branch: String,
        energy: f64,
        selected: f64,
    },

    #[error("candidate rotation is not stationary (residual {residual:e})")]
    NotStationary { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
