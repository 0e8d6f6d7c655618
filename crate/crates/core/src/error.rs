use thiserror::Error;

/// Errors raised by simulation, quadrature and harness routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or window specification.
    #[error("configuration error: {0}")]
    Config(String),

    /// A coordinate left the domain on which a path or environment is known.
    /// The caller is expected to enlarge the window or horizon and retry.
    #[error("range error: {what} = {value} outside [{lo}, {hi}]")]
    Range {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Argument not in the domain of the operation (e.g. off-lattice point).
    #[error("domain error: {0}")]
    Domain(String),

    /// A function does not carry the smoothness an operation requires.
    #[error("contract error: {0}")]
    Contract(String),

    /// A numerical invariant that cannot fail in exact arithmetic failed.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn range(what: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Error::Range {
            what: what.into(),
            value,
            lo,
            hi,
        }
    }

    /// True for errors that signal "grow the window / horizon and retry".
    pub fn is_range(&self) -> bool {
        matches!(self, Error::Range { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
