use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh is not closed: edge ({0}, {1}) is shared by {2} triangle(s)")]
    NotClosed(usize, usize, usize),

    #[error("inconsistent orientation: directed edge ({0}, {1}) appears twice")]
    InconsistentOrientation(usize, usize),

    #[error("degenerate panel {index}: area {area:e}")]
    DegeneratePanel { index: usize, area: f64 },

    #[error("coincident points in kernel evaluation")]
    CoincidentPoints,

    #[error("wavenumber {k} outside the validity window ({reason})")]
    WavenumberOutOfRange { k: Complex64, reason: String },

    #[error("ill-conditioned {system} system (condition estimate {condition:.3e})")]
    IllConditioned { system: &'static str, condition: f64 },

    #[error(
        "resonance: 1/gamma is within tolerance of eigenvalue {nearest_eigenvalue} \
         (|1 - gamma*eigenvalue| = {distance:.3e})"
    )]
    Resonance {
        nearest_eigenvalue: Complex64,
        distance: f64,
    },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("tracking ambiguity for mode {mode}: best overlap {overlap:.3}")]
    TrackingAmbiguity { mode: usize, overlap: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
