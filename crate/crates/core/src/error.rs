//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A geometry or scenario description is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// An iterative method failed to converge or produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// No placement satisfies the minimum-spacing constraint.
    #[error("feasibility error: {0}")]
    Feasibility(String),
    /// The effective channel vanished, so no beamformer can be normalized.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Io(_) => 2,
            Error::Numeric(_) | Error::DegenerateChannel(_) => 3,
            Error::Feasibility(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
