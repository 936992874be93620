use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty block: |m| = {m} exceeds N + 1 = {max}")]
    EmptyBlock { m: i64, max: u32 },

    #[error("eigensolver did not converge for block m = {m} after {sweeps} sweeps")]
    EigenNonConvergence { m: i64, sweeps: usize },

    #[error("quadrature did not reach relative tolerance {tolerance:e} (error estimate {estimate:e})")]
    QuadratureNonConvergence { tolerance: f64, estimate: f64 },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("undersampled grid: dt = {dt:e} s exceeds {bound:e} s (8 samples per shortest period)")]
    Undersampled { dt: f64, bound: f64 },

    #[error("physical bound violated: per-molecule moment {moment_bohr} µB exceeds {bound_bohr} µB")]
    PhysicalBound { moment_bohr: f64, bound_bohr: f64 },

    #[error("initial guess heuristic failed: {0}; provide explicit initial values")]
    HeuristicFailure(String),

    #[error("ill-conditioned normal equations: {0}")]
    Conditioning(String),

    #[error("fit did not converge after {iterations} iterations (residual rms {residual_rms:e})")]
    FitNotConverged { iterations: usize, residual_rms: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
