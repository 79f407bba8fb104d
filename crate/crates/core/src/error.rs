use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates its documented precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A merge tree or plot does not satisfy its structural invariants.
    #[error("malformed merge tree: {0}")]
    Structure(String),

    /// The least-squares design matrix is rank deficient.
    #[error("degenerate regression: {0}")]
    Degenerate(String),

    /// Input data (files, records) could not be interpreted.
    #[error("bad data in `{field}`: {reason}")]
    Data { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn data(field: impl Into<String>, reason: impl ToString) -> Self {
        Error::Data {
            field: field.into(),
            reason: reason.to_string(),
        }
    }

    /// True for errors caused by domain preconditions rather than I/O or
    /// unreadable input.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Parameter { .. } | Error::Structure(_) | Error::Degenerate(_)
        )
    }
}
