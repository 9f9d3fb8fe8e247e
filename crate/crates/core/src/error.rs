use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image is {height}x{width}; at least 3x3 is required")]
    ImageTooSmall { height: usize, width: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("removing bands would leave an empty image ({axis})")]
    EmptyResult { axis: &'static str },

    #[error("resized image would have a zero dimension ({height}x{width})")]
    DegenerateOutput { height: usize, width: usize },

    #[error("need at least 2 tokens, got {0}")]
    TooFewTokens(usize),

    #[error("token {0} has zero norm; cosine similarity is undefined")]
    ZeroNormToken(usize),

    #[error("synthetic spec conflict: {0}")]
    SpecConflict(String),

    #[error("token dimension {dim} is smaller than the {n_content} content tokens requested")]
    DimTooSmall { dim: usize, n_content: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("malformed token file: {0}")]
    MalformedTokens(String),

    #[error("image decode/encode failed for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
