use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("pixel ({row}, {col}) outside the interior of a {width}x{height} frame")]
    Index {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },

    #[error("corrupt event stream: {0}")]
    CorruptStream(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("image error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
