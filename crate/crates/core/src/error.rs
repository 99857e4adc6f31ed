use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ray (omega = {omega}, eta = {eta}) is glancing")]
    Glancing { omega: f64, eta: f64 },

    #[error("root finder did not converge for ray (omega = {omega}, eta = {eta})")]
    NoConvergence { omega: f64, eta: f64 },

    #[error("{0} lies outside the open projection interval")]
    Domain(f64),

    #[error("matrix is singular to working precision (pivot {pivot} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("QR iteration did not converge after {sweeps} sweeps ({deflated} of {dim} eigenvalues deflated)")]
    EigenNoConvergence { sweeps: usize, deflated: usize, dim: usize },

    #[error("resolution too low: {0}")]
    Resolution(String),

    #[error("discretisation not converged: {0}")]
    Refinement(String),

    #[error("unitarity defect {defect:.3e} exceeds {limit:.1e}; increase the boundary or angular resolution")]
    UnitarityDefect { defect: f64, limit: f64 },

    #[error("phase branch ambiguous between k = {k0} and k = {k1}; refine the ladder")]
    BranchAmbiguity { k0: f64, k1: f64 },

    #[error("corrupt operator container: {0}")]
    Corrupt(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
