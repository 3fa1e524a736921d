use std::io;

use thiserror::Error;

/// Errors produced by any fixq operation.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or tensor violated a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A file did not start with the expected magic bytes.
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    /// A file ended before the structure it promised was complete.
    #[error("truncated input while reading {0}")]
    Truncated(String),

    /// A declared dimension or count does not fit in memory limits.
    #[error("dimension overflow: {0}")]
    Overflow(String),

    /// A stored byte or tag has no valid interpretation.
    #[error("format error: {0}")]
    Format(String),

    /// An input value is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scheme/grouping combination or mode the toolkit refuses.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical failure such as a diverged training loss.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
