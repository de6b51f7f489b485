use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text: CSV rows, manifests, profile files, tokens.
    #[error("{0}")]
    Parse(String),

    /// Out-of-range parameters or violated preconditions.
    #[error("{0}")]
    Invalid(String),

    /// Input is well formed but the analysis cannot proceed (no turnaround,
    /// irreparable gaps, missing joints, mismatched profiles).
    #[error("{0}")]
    Domain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the file an error came from.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for errors that map to a usage/parse failure (exit code 2) rather
    /// than a domain failure (exit code 1).
    pub fn is_parse_or_usage(&self) -> bool {
        match self {
            Error::Parse(_) | Error::Invalid(_) | Error::Io { .. } => true,
            Error::Domain(_) => false,
            Error::InFile { source, .. } => source.is_parse_or_usage(),
        }
    }
}
