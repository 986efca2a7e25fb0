use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Fewer observations than the estimator can support.
    #[error("insufficient-data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Sample carries no usable variation (zero variance, all-equal, ...).
    #[error("degenerate-sample: {0}")]
    DegenerateSample(String),

    /// X_gamma'X_gamma is not positive definite for the requested indicator set.
    #[error("singular-submatrix: Cholesky failed for the selected columns")]
    SingularSubmatrix,

    /// Every configuration of a pair update has zero posterior mass.
    #[error("no-valid-configuration: all four indicator configurations are singular")]
    NoValidConfiguration,

    /// Pseudo-data vector is identically zero.
    #[error("degenerate-pseudo-data: z is identically zero")]
    DegeneratePseudoData,

    /// An operation that consumes Monte Carlo draws received none.
    #[error("empty-trace: no post-burn-in sweeps available")]
    EmptyTrace,

    /// Numerical quadrature produced a non-finite result.
    #[error("quadrature-failed: {0}")]
    QuadratureFailed(String),

    /// Invalid argument or configuration.
    #[error("invalid-input: {0}")]
    InvalidInput(String),

    /// Parse failure in an input file, with 1-based file coordinates.
    #[error("parse error in {path} at row {row}, column {col}: {msg}")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("no in-mask voxels")]
    NoInMaskVoxels,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
