use thiserror::Error;

/// Errors raised by the geometry, projection and online-learning routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("projection did not converge after {iters} iterations (last gap {gap:e})")]
    NotConverged { iters: usize, gap: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("step {t} failed: {source}")]
    StepFailed {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(invalid(format!("{what}: length {got}, expected {want}")));
    }
    Ok(())
}
