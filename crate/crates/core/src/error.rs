use thiserror::Error;

/// Errors surfaced by the solver, evolution and CLI pipelines.
///
/// The CLI maps these onto process exit codes: validation failures exit 2,
/// window exhaustion exits 3, numeric failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("window exhaustion: {0}")]
    WindowExhaustion(String),

    #[error("insufficient unmasked area: need {needed} cells, have {available}")]
    InsufficientArea { needed: usize, available: usize },

    #[error("negative values present: {0}")]
    NegativeValues(String),

    #[error("CFL violation: dt = {dt} exceeds limit {limit} (max |u| = {max_u})")]
    CflViolation { dt: f64, limit: f64, max_u: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("perturbation cannot hit magnitude {target} within budget (reached {reached})")]
    MagnitudeUnreachable { target: f64, reached: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::GridMismatch(_)
            | Error::NegativeValues(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::WindowExhaustion(_) | Error::InsufficientArea { .. } => 3,
            Error::CflViolation { .. } | Error::Numeric(_) | Error::MagnitudeUnreachable { .. } => 4,
        }
    }
}
