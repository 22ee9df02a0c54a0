use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the estimation engine, the CLI and the checkpoint store.
///
/// Every variant maps onto one of the documented process exit codes through
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("{design} design is numerically rank deficient (condition estimate {condition:.3e})")]
    RankDeficient { design: &'static str, condition: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual norm {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("complete or quasi-complete separation detected (|linear predictor| reached {max_eta:.1})")]
    Separation { max_eta: f64 },

    #[error("degenerate inference for mediator {index}: {reason}")]
    DegenerateInference { index: usize, reason: String },

    #[error("degenerate contrast: x and x* are both {0}")]
    DegenerateContrast(f64),

    #[error("checkpoint integrity failure: {0}")]
    Integrity(String),

    #[error("checkpoint format version {found} is not supported (expected {expected}); migrate the file first")]
    Version { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 2 input/parse, 3 not ready, 4 numerical, 5 integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Input(_)
            | Error::Parse { .. }
            | Error::DegenerateContrast(_)
            | Error::Io { .. } => 2,
            Error::NotReady(_) => 3,
            Error::RankDeficient { .. }
            | Error::NoConvergence { .. }
            | Error::Separation { .. }
            | Error::DegenerateInference { .. } => 4,
            Error::Integrity(_) | Error::Version { .. } => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
