use thiserror::Error;

/// Errors raised by the phase-space, Fock-space and decision engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not {kind} (defect {defect:.3e})")]
    NotSymmetric { kind: &'static str, defect: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("commutation matrix is singular")]
    SingularCommutator,

    #[error("degenerate quadratic form: mode frequency {0:.3e}")]
    DegenerateForm(f64),

    #[error("ill-conditioned model: mode frequency {freq:.3} exceeds {limit} (use the pure-state path)")]
    IllConditioned { freq: f64, limit: f64 },

    #[error("unphysical covariance: symplectic eigenvalue {sympl:.6e} not above the vacuum level {vacuum:.6e}")]
    UnphysicalCovariance { sympl: f64, vacuum: f64 },

    #[error("truncation mass {mass:.3e} exceeds {threshold:.1e} at dimension {dim}; increase the Fock dimension")]
    Truncation { mass: f64, threshold: f64, dim: usize },

    #[error("Fock space dimension {dim} exceeds the cap {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("ill-separated ground state (gap {0:.3e})")]
    IllSeparatedGround(f64),

    #[error("grid too coarse: quadrature residual {residual:.3e} exceeds {limit:.1e}")]
    QuadratureResidual { residual: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate posterior measure: min eigenvalue {min_eig:.3e} of the measure covariance (norm {norm:.3e})")]
    DegenerateMeasure { min_eig: f64, norm: f64 },

    #[error("inverse square root floor engaged on {floored} of {dim} directions")]
    FloorEngaged { floored: usize, dim: usize },

    #[error("fixed-point solver diverged after {iterations} iterations (residual {residual:.3e})")]
    Divergence { iterations: usize, residual: f64, trace: Vec<(usize, f64)> },

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("Monte-Carlo estimation is not defined for the simple (delta) cost; use the quadrature route")]
    DeltaCostSampling,

    #[error("grid clips {0:.3e} of the outcome mass")]
    GridClipping(f64),

    #[error("{what} {value:.3e} does not meet the threshold {threshold:.1e}")]
    ThresholdNotMet { what: String, value: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
