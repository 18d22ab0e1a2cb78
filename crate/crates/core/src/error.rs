use std::fmt;
use std::io;

/// Errors raised across the question generation pipeline.
#[derive(Debug)]
pub enum Error {
    /// Operand shapes are incompatible for the named operation.
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// A numeric input was empty, non-finite or otherwise unusable.
    Numeric(String),
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// A token id outside the vocabulary.
    UnknownToken(usize),
    /// Malformed input file; `line` is 1-based.
    Parse {
        line: usize,
        message: String,
    },
    /// Training produced a NaN or infinite loss.
    NonFiniteLoss {
        step: usize,
        epoch: usize,
        batch: Vec<usize>,
    },
    /// Checkpoint container could not be decoded.
    Checkpoint(String),
    Io(io::Error),
    Json(serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, left, right } => {
                write!(f, "{op}: incompatible shapes {left:?} and {right:?}")
            }
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::UnknownToken(id) => write!(f, "token id {id} is not in the vocabulary"),
            Error::Parse { line, message } => write!(f, "line {line}: {message}"),
            Error::NonFiniteLoss { step, epoch, batch } => write!(
                f,
                "non-finite loss at step {step} (epoch {epoch}), batch examples {batch:?}"
            ),
            Error::Checkpoint(msg) => write!(f, "checkpoint: {msg}"),
            Error::Io(e) => write!(f, "io: {e}"),
            Error::Json(e) => write!(f, "json: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
