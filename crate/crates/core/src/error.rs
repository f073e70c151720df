use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a geometric or section invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Scenario file is well-formed JSON but does not match the schema.
    #[error("schema violation at {field}: {message}")]
    Schema { field: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Argument outside the domain of an operation (e.g. step not below t).
    #[error("domain error: {0}")]
    Domain(String),

    /// A hypothesis required by the operation does not hold for this input.
    #[error("refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}
