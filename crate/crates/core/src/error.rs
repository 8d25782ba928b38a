use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested quantity does not exist for these parameters
    /// (for instance the critical coupling when `gamma >= J`).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("canonical chart is singular at |z| = 1 ({0})")]
    Pole(String),

    #[error("no sign change in bracket; scanned (V, max Re lambda): {scanned:?}")]
    Bracket { scanned: Vec<(f64, f64)> },

    #[error("integrator failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("density matrix not positive: minimum eigenvalue {0:e}")]
    Positivity(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("exchange symmetry violated: max |[L, Pi_s]| = {0:e}")]
    Symmetry(f64),

    #[error("dense superoperator needs {required} bytes, budget is {budget}")]
    SizeBudget { required: u64, budget: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("eigensolver did not converge")]
    Eigen,

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
