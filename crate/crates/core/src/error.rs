use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid placement: scaled object at ({cy:.1}, {cx:.1}) does not overlap the canvas")]
    InvalidPlacement { cy: f64, cx: f64 },

    #[error("insufficient backgrounds: {foregrounds} foregrounds need distinct backgrounds, only {backgrounds} available")]
    InsufficientBackgrounds {
        foregrounds: usize,
        backgrounds: usize,
    },

    #[error("style image `{0}` not found in style pool")]
    MissingStyle(String),

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("non-finite gradient in layer `{layer}`")]
    Numerical { layer: String },

    #[error("png decode failed at byte offset {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("png encode failed: {0}")]
    Encode(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("record `{id}` has no label file")]
    MissingLabel { id: String },

    #[error("label access denied for record `{id}`: split is images-only")]
    LabelAccessDenied { id: String },

    #[error("prediction failed for target `{target_id}`: {source}")]
    Predictor {
        target_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
