use std::io;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    /// A plaintext exceeded the certified bound; the leakage certificate would be void.
    #[error("bound violation: |{value}| exceeds certified bound {bound}")]
    BoundViolation { value: f64, bound: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("incomplete share set: {0}")]
    IncompleteSet(String),

    #[error("beaver triple already consumed")]
    TripleReuse,

    #[error("triple store exhausted after {consumed} triples")]
    TriplesExhausted { consumed: u64 },

    #[error("protocol desync: {0}")]
    ProtocolDesync(String),

    #[error("peer unreachable: {0}")]
    PeerUnreachable(String),

    #[error("numeric failure: {message} (residual estimate {residual:e})")]
    NumericFailure { message: String, residual: f64 },

    #[error("format error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, message: String },

    #[error("training diverged at iteration {iteration}")]
    TrainingDiverged { iteration: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// True for violations of an operation's stated contract (as opposed to
    /// I/O or transport failures).
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Shape(_)
                | Error::BoundViolation { .. }
                | Error::Domain(_)
                | Error::IncompleteSet(_)
                | Error::TripleReuse
                | Error::TriplesExhausted { .. }
                | Error::Format { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
