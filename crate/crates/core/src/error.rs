use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Io,
    Parse,
    Integrity,
    Unobservable,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {element}: {message}")]
    Parse { element: String, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("switch {switch} has no state defined at {at}")]
    MissingSwitchState { switch: String, at: String },

    #[error("phase mismatch on {edge}: {message}")]
    PhaseMismatch { edge: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    LineGeometry { line: String, message: String },

    #[error("inductance matrix of line {0} is singular")]
    SingularInductance(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("unstable integration step: {0}")]
    UnstableStep(String),

    #[error("not observable: {unknowns} unknowns but rank {rank}; unconstrained: {}", .modes.join("; "))]
    Unobservable {
        unknowns: usize,
        rank: usize,
        modes: Vec<String>,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("duplicate tick {tick} for channel {channel}")]
    DuplicateTick { tick: f64, channel: String },

    #[error("waveform error: {0}")]
    Waveform(String),
}

impl Error {
    pub fn parse(element: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            element: element.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::Io { .. } => ErrorFamily::Io,
            Error::Parse { .. } => ErrorFamily::Parse,
            Error::Integrity(_)
            | Error::MissingSwitchState { .. }
            | Error::PhaseMismatch { .. }
            | Error::Dimension(_)
            | Error::InvalidParameter(_)
            | Error::LineGeometry { .. }
            | Error::Alignment(_)
            | Error::DuplicateTick { .. }
            | Error::Waveform(_) => ErrorFamily::Integrity,
            Error::Unobservable { .. } => ErrorFamily::Unobservable,
            Error::SingularInductance(_) | Error::Singular(_) | Error::UnstableStep(_) => {
                ErrorFamily::Numeric
            }
        }
    }
}
