use thiserror::Error;

/// Errors produced by the simulation library.
///
/// The variants are grouped so that a front end can map them onto process
/// exit codes: input problems, infeasible or exhausted requests, and broken
/// internal invariants.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),

    #[error("enumeration refused: {edges} edges exceeds the limit of {limit}")]
    TooLarge { edges: usize, limit: usize },

    #[error("no outermost circuit encloses the origin")]
    NoCircuit,

    #[error("rejection sampling exhausted after {tries} tries (acceptance rate <= {rate_bound:.3e})")]
    Exhausted { tries: u64, rate_bound: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::DegenerateParams(_) | Error::Parse(_) | Error::TooLarge { .. } => 2,
            Error::NoCircuit | Error::Exhausted { .. } | Error::Infeasible(_) => 3,
            Error::Invariant(_) => 4,
            Error::Io(_) | Error::Json(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
