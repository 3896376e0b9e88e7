//! Error type shared by every module in the crate.
//!
//! Numerical routines in this crate prefer returning a structured error over
//! silently producing garbage: quadratures report non-convergence, fixed-point
//! solvers report divergence or stalls, and validity preconditions are checked
//! up front.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside the documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A matrix that must be entrywise nonnegative has a negative entry.
    #[error("negative entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    /// A coupling profile is reducible (or numerically indistinguishable from
    /// reducible), so its Perron–Frobenius data is not well defined.
    #[error("profile is reducible or has a non-positive leading eigenvector: {0}")]
    ReducibleProfile(String),

    /// An iterative eigenvalue/eigenvector computation did not reach its
    /// tolerance within the iteration budget.
    #[error("power iteration did not converge within {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    PowerIterationStalled {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    /// A linear system is singular to working precision.
    #[error("linear system is singular to working precision ({context})")]
    SingularSystem { context: String },

    /// A contour quadrature failed its internal node-doubling check.
    #[error("contour quadrature did not converge: half-grid deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    QuadratureNotConverged { deviation: f64, tolerance: f64 },

    /// An empirical spectral quantity requires every eigenvalue be enclosed by
    /// the integration contour, and one escaped.
    #[error("spectrum reaches the contour: max |eigenvalue| = {spectral_radius:.6} vs radius {radius:.6}")]
    SpectrumOutsideContour { spectral_radius: f64, radius: f64 },

    /// A fixed-point solve left its validity region or stopped making progress.
    #[error("fixed-point iteration failed: {0}")]
    FixedPointFailed(String),

    /// Parameters lie outside the perturbative validity region of a solver.
    #[error("parameters outside validity region: {0}")]
    OutsideValidity(String),

    /// A truncated infinite integral whose tail could not be certified small.
    #[error("integral tail not negligible at the truncation point: estimated tail {tail:.3e} exceeds {tolerance:.3e}")]
    TailNotNegligible { tail: f64, tolerance: f64 },

    /// An eigendecomposition is too ill-conditioned to trust.
    #[error("eigendecomposition ill-conditioned: reconstruction residual {residual:.3e}")]
    IllConditionedEigenbasis { residual: f64 },

    /// An exp/propagation reached magnitudes where doubles lose all meaning.
    #[error("dynamics overflow: exponent {exponent:.2} exceeds the representable range")]
    DynamicsOverflow { exponent: f64 },

    /// The underlying LAPACK call reported an error.
    #[error("linear algebra backend error: {0}")]
    Backend(#[from] ndarray_linalg::error::LinalgError),

    /// File input could not be read or parsed.
    #[error("profile file error: {0}")]
    ProfileFile(String),
}

impl Error {
    /// Convenience constructor for parameter validation.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
