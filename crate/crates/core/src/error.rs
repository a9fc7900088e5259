use thiserror::Error;

use crate::certify::CertificateReport;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input text or structurally invalid data.
    #[error("format error: {0}")]
    Format(String),

    /// Well-formed input that violates a mathematical requirement.
    #[error("validation error: {0}")]
    Validation(String),

    /// Input exceeds a hard size limit.
    #[error("size error: {0}")]
    Size(String),

    /// A measure assigns zero mass to a ball that the solver needs to be positive.
    #[error("barrier error: {0}")]
    Barrier(String),

    /// A proved inequality failed on a pipeline run.
    #[error("certificate error: `{inequality}` failed on instance {instance}")]
    Certificate {
        inequality: String,
        instance: String,
        report: Box<CertificateReport>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn format(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}
