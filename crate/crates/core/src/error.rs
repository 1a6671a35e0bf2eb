use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error(
        "line {line}: request id {id} already used on line {previous} within the pairing window"
    )]
    DuplicateRequestId {
        line: usize,
        previous: usize,
        id: String,
    },

    #[error("invalid message {raw:?}: {reason}")]
    MalformedMessage { raw: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no candidate request type field found; supply --type-field explicitly")]
    NoTypeField,

    #[error("request matches no known request type: {0}")]
    UnknownRequestType(String),

    #[error("response of type {request_type} matches no inferred response format: {raw}")]
    UnmatchedResponse { request_type: String, raw: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("bundle {path}: {message}")]
    Bundle { path: PathBuf, message: String },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than usage or a bug.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::Invariant(_) | Error::Argument(_) | Error::Config(_)
        )
    }
}
