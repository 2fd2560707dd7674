//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("FormatError: {0}")]
    Format(String),

    #[error("UnsupportedVersion: found {found}, expected {expected}")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("CorruptFile: {0}")]
    CorruptFile(String),

    #[error("InvalidData: {0}")]
    InvalidData(String),

    #[error("IoError: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ZeroNormFrame: frame {index} has zero norm, cosine similarity is undefined")]
    ZeroNormFrame { index: usize },

    #[error("InvalidKernel: {0}")]
    InvalidKernel(String),

    #[error("NoValidWindows: every anchor window was skipped")]
    NoValidWindows,

    #[error("ShapeError: {0}")]
    Shape(String),

    #[error("PairingError: {0}")]
    Pairing(String),

    #[error("NoCuts: scene cut timeline is empty")]
    NoCuts,

    #[error("InsufficientBeats: {0}")]
    InsufficientBeats(String),

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    #[error("NumericalError: {0}")]
    Numerical(String),

    #[error("TrainingDiverged: loss became non-finite at step {step}")]
    TrainingDiverged { step: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::TrainingDiverged { .. })
    }
}
