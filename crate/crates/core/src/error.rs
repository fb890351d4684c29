use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("no zero-level-set data")]
    NoZeroSetData,

    #[error("point ({x}, {y}) lies outside the grid bounds")]
    OutOfBounds { x: f64, y: f64 },

    #[error("robot hash mismatch: grid was built for {expected}, query robot is {found}")]
    RobotMismatch { expected: String, found: String },

    #[error("unsupported format version: found {found}, expected {expected}")]
    Version { found: u64, expected: u64 },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("vanishing gradient (norm {norm:e})")]
    VanishingGradient { norm: f64 },

    /// The reactive safety constraint could not be met inside the control box.
    /// `fallback` is the slack-penalized control that violates it by `violation`.
    #[error("safety infeasible: constraint violated by {violation:e}")]
    SafetyInfeasible { violation: f64, fallback: Vec<f64> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Converts a serde_json error into a [`Error::Parse`] carrying the number
    /// of bytes of `text` consumed when parsing stopped.
    pub(crate) fn parse(text: &str, err: serde_json::Error) -> Self {
        Error::Parse {
            offset: byte_offset(text, err.line(), err.column()),
            message: err.to_string(),
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}
