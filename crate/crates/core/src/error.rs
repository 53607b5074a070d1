use thiserror::Error;

/// Errors produced by the coupling, Green's-function and oracle routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coincident points: separation {0:e} is not positive")]
    CoincidentPoints(f64),

    #[error("free-space Green's function is singular at zero frequency; use the electrostatic kernel")]
    UseStaticKernel,

    #[error("coupling block has non-negligible imaginary part (relative {0:e})")]
    InvalidCoupling(f64),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    Convergence { estimate: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("static limit unavailable: {0}")]
    StaticLimit(String),

    #[error("unstable system: polariton {index} has non-positive frequency {frequency:e}")]
    Instability { index: usize, frequency: f64 },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NonHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Hilbert space dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}

impl Error {
    /// True for failures of an iterative numerical procedure (quadrature,
    /// eigensolver, series) as opposed to invalid input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::Eigensolver(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
