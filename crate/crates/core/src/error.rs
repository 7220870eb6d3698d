use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("operator family is empty")]
    EmptyFamily,
    #[error("sample grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e} exceeds {tolerance:.1e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },
    #[error("cannot reach tolerance {tolerance:.1e}: {reason}")]
    ToleranceNotAchievable { tolerance: f64, reason: String },
    #[error("decay rate must be positive, got {0}")]
    NonPositiveDecay(f64),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("exact evaluation is only available on l2")]
    ExactPathUnavailable,
    #[error("family is degenerate: lower frame constant {0:.3e} is numerically zero")]
    DegenerateFamily(f64),
    #[error("eigenvalue computation failed")]
    EigenSolverFailure,
    #[error("lambda = {re} + {im}i lies on the spectrum (distance {distance:.3e})")]
    SpectrumHit { re: f64, im: f64, distance: f64 },
    #[error("generator is not stable: spectral abscissa s(A) = {0}")]
    NotStable(f64),
    #[error("Neumann series does not contract (ratio {0:.6})")]
    SeriesDiverges(f64),
    #[error("certified epsilon0 = {epsilon0:.6e} exceeds |s(A)| = {abscissa:.6e}")]
    ConservativenessViolation { epsilon0: f64, abscissa: f64 },
    #[error("perturbation norm {norm:.6e} is not below the margin {margin:.6e}")]
    MarginExceeded { norm: f64, margin: f64 },
    #[error("no contracting shift found below omega = {0}")]
    ShiftSearchFailed(f64),
    #[error("cross-check failed: {0}")]
    CrossCheckFailed(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
