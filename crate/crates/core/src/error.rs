use thiserror::Error;

/// Library error type. Config and parameter errors are reported with the
/// offending field name so CLI users can fix the input without reading code.
#[derive(Debug, Error)]
pub enum Error {
    /// A point left the domain of a map (boundary or exterior of the simplex,
    /// wrong half-line, non-finite coordinate).
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched vector lengths between coupled arguments.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A scalar or structural parameter outside its documented range.
    #[error("invalid `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    /// A chain produced a non-finite state.
    #[error("chain diverged (non-finite state) at iteration {iteration}")]
    Divergence { iteration: u64 },

    /// Every step size in a grid search diverged.
    #[error("all step sizes diverged: {grid:?}")]
    AllDiverged { grid: Vec<f64> },

    /// Malformed experiment configuration (unknown key, bad type, bad value).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
