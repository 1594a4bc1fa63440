use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] privtier_core::Error),

    #[error("malformed document at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("duplicate prediction for video {video_id:?} on line {line}")]
    DuplicatePrediction { video_id: String, line: u64 },

    #[error("{}: cannot decode PNG: {message}", path.display())]
    Png { path: PathBuf, message: String },

    #[error("{}: {message}", path.display())]
    Walk { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
