use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at {location}: {value}")]
    NonFinite { location: String, value: f64 },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn non_finite(location: impl Into<String>, value: f64) -> Self {
        Error::NonFinite {
            location: location.into(),
            value,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Stable machine-readable code, printed by the CLI in front of the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "E_INPUT",
            Error::NonFinite { .. } => "E_NONFINITE",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::Config { .. } => "E_CONFIG",
            Error::Context { source, .. } => source.code(),
            Error::Io(_) => "E_IO",
            Error::Csv(_) => "E_CSV",
        }
    }
}
