use std::io;

use thiserror::Error;

/// Errors raised by the codec, the analysis tools and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller handed us something we cannot work with.
    #[error("invalid input: {0}")]
    Input(String),

    /// A file did not match the expected binary or text layout.
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    /// An internal consistency check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input or unreadable files, as
    /// opposed to broken internal invariants.
    pub fn is_input(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
