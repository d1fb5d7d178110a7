use thiserror::Error;

/// Everything that can go wrong across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: ragged CSV rows, empty files, unparseable DOT or JSON.
    #[error("format error: {0}")]
    Format(String),

    /// Input disagrees with a declared schema (unknown variable, too many tokens).
    #[error("schema error: {0}")]
    Schema(String),

    /// An operation was called with arguments that violate its preconditions.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An internal invariant failed; indicates a bug, not bad input.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
