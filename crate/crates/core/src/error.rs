use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: non-unit vectors, dimension mismatches, bad flags.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numeric parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A geometric construction could not be completed.
    #[error("construction error: {0}")]
    Construction(String),

    /// Input exceeds what an exhaustive routine is allowed to enumerate.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Evaluation point outside the domain of a sampled object.
    #[error("domain error: {0}")]
    Domain(String),

    /// A verified bound or invariant does not hold.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Artifact schema tag does not match the expected document type.
    #[error("schema mismatch: expected {expected:?}, found {found:?}")]
    Schema { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Construction(_) => 3,
            Error::Invariant(_) => 4,
            _ => 2,
        }
    }
}
