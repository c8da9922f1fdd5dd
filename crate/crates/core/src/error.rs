use thiserror::Error;

/// Errors raised by the geometric and numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point is off the Scherk surface: implicit residual {residual:e}")]
    OffSurface { residual: f64 },

    #[error("normal ({nx}, {ny}, {nz}) lies inside a puncture disc of radius {phi0}")]
    PunctureProximity { nx: f64, ny: f64, nz: f64, phi0: f64 },

    #[error("degenerate (x, z) chart: |sinh x sinh z| = {value} is too close to 1")]
    DegenerateChart { value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible puncture radius {phi0}: must lie in (0, pi/4)")]
    InfeasiblePhi0 { phi0: f64 },

    #[error("degenerate triangle {triangle}: {reason}")]
    DegenerateTriangle { triangle: usize, reason: String },

    #[error("sparse factorisation failed: {0}")]
    Factorization(String),

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("graph outside the tubular domain at node {node}: |h| |A| = {value}")]
    TubularDomain { node: usize, value: f64 },

    #[error("Newton iteration did not converge; residual history {history:?}")]
    NonConvergence { history: Vec<f64> },

    #[error("linearised operator is numerically singular: spectral gap {gap:e}")]
    SingularOperator { gap: f64 },

    #[error("boundary data rejected: {0}")]
    BoundaryData(String),

    #[error("mirror symmetry violated: mismatch {mismatch:e}")]
    ReflectionMismatch { mismatch: f64 },

    #[error("unknown symmetry class '{0}'; valid classes: xz-inv-yz-anti, xz-inv-yz-inv, xz-anti-yz-inv, xz-anti-yz-anti, all")]
    UnknownClass(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
