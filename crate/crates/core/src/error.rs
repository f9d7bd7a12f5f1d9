use thiserror::Error;

/// Errors raised across the simulator, training engine and experiment pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QramError {
    /// A parameter or configuration value is outside its permitted range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Shapes, qubit indices or lengths do not line up.
    #[error("structural error: {0}")]
    Structure(String),

    /// Input that cannot be embedded, such as an all-zero amplitude vector.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Non-finite values encountered during training.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Dataset could not be read or parsed.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QramError {
    fn from(e: std::io::Error) -> Self {
        QramError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QramError>;
