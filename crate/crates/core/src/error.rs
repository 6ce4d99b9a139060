use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("capacity exceeded: {cells} panel cells requested, budget is {budget}")]
    Capacity { cells: usize, budget: usize },

    #[error("calibration failed for the {equation} equation: {reason}")]
    Calibration { equation: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("consumption {consumption} outside [0, {available}] at t = {t}")]
    Constraint {
        t: usize,
        consumption: f64,
        available: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        last_good: Box<crate::policy_net::MlpParams>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 configuration, 3 input data, 4 numerics, 5 filesystem.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::Capacity { .. } => 2,
            Error::Parse { .. }
            | Error::InsufficientData(_)
            | Error::Calibration { .. }
            | Error::Range(_)
            | Error::Structural(_)
            | Error::Json(_) => 3,
            Error::InvalidState(_)
            | Error::Domain(_)
            | Error::Constraint { .. }
            | Error::Numeric(_)
            | Error::Diverged { .. } => 4,
            Error::Io { .. } => 5,
        }
    }
}
