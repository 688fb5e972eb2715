use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: expected {expected}, got {actual}")]
    Size { expected: String, actual: String },

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("class {class_id} is not a foreground class and cannot carry an instance segment")]
    ClassRole { class_id: u8 },

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("no class has a defined IoU (every union is empty)")]
    EmptyEvaluation,

    #[error("invalid spec at `{path}`: {message}")]
    Spec { path: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("png: {0}")]
    Png(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn size(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Size {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn dims(expected: (u32, u32), actual: (u32, u32)) -> Self {
        Error::size(
            format!("{}x{}", expected.0, expected.1),
            format!("{}x{}", actual.0, actual.1),
        )
    }

    pub(crate) fn spec(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            path: path.into(),
            message: message.into(),
        }
    }
}
