use std::path::PathBuf;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("no peak found in correlation histogram (max {max} counts, median {median})")]
    NoPeakFound { max: u64, median: u64 },

    #[error("visibility undefined: all coincidence counts are zero")]
    UndefinedVisibility,

    #[error("expected {expected} measurement records, got {got}")]
    RecordCount { expected: usize, got: usize },

    #[error("records do not form one basis family: {0}")]
    MixedBasis(String),

    #[error("calibration targets unreachable: {0}")]
    Unreachable(String),

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
