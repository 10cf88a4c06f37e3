use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("calibration missing {0}")]
    MissingCalibration(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("frame {got} presented after frame {last}; frames must be strictly increasing")]
    FrameOrder { last: usize, got: usize },

    #[error("frame count mismatch: ground truth has {gt} frames, hypotheses have {hyp}")]
    FrameCountMismatch { gt: usize, hyp: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
