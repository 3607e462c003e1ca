use thiserror::Error;

/// Errors raised by the library.
///
/// Each variant maps onto one of the command-line exit codes via
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("wrong case: {0}")]
    WrongCase(String),

    #[error("closed form unsupported in this regime: {0}")]
    RegimeUnsupported(String),

    #[error("initial data unsupported by the exact solution: {0}")]
    UnsupportedInitialData(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Process exit code: 1 invalid input, 2 exact regime unsupported,
    /// 3 numerical or I/O failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Configuration(_) | Error::Range(_) | Error::WrongCase(_) => 1,
            Error::RegimeUnsupported(_) | Error::UnsupportedInitialData(_) => 2,
            Error::NumericalFailure(_) | Error::Io(_) | Error::Serialization(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
