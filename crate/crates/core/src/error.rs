use std::io;

use thiserror::Error;

/// Errors produced by the scanning, sampling and fitting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two inputs that must agree in size do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An input collection that must be non-empty is empty.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// A file could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    /// A computation produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn dimension(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
