use thiserror::Error;

/// Errors raised by games, forecasters, oracles and bound checks.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent or unsupported configuration (expert counts, families, signs).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or non-finite data, optionally tied to a round.
    #[error("data error{}: {message}", round.map(|t| format!(" at round {t}")).unwrap_or_default())]
    Data { round: Option<usize>, message: String },

    /// A parameter outside the domain of a formula (e.g. gamma outside (0, 1)).
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions before reaching the requested accuracy.
    #[error("quadrature did not converge: achieved error estimate {achieved:e}, requested {requested:e}")]
    Numeric { achieved: f64, requested: f64 },

    /// Graph structure problems (no path, bad node ids).
    #[error("graph error: {0}")]
    Graph(String),

    /// An enumeration or allocation guard was exceeded.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data {
            round: None,
            message: message.into(),
        }
    }

    pub(crate) fn data_at(round: usize, message: impl Into<String>) -> Self {
        Error::Data {
            round: Some(round),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
