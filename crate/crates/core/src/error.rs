use thiserror::Error;

/// Library-wide error type.
///
/// The variants are coarse on purpose: callers mostly care whether a failure
/// came from bad input data, a numerical breakdown, or the filesystem.
#[derive(Debug, Error)]
pub enum Error {
    /// A text format violation, located by file and 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Invalid or inconsistent input data (bad shapes, empty documents,
    /// mismatched vocabularies, out-of-range values).
    #[error("{0}")]
    Data(String),

    /// A numerical failure: overflow, underflow, NaN, or a solver that
    /// could not reach a usable state.
    #[error("{0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }

    pub fn io(path: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
