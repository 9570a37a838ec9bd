use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command-line front end for exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or configuration values.
    Config,
    /// Missing, unreadable or malformed files.
    Asset,
    /// Non-finite values during optimisation.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}:{line}: non-triangle face with {vertices} vertices")]
    NonTriangleFace { path: PathBuf, line: usize, vertices: usize },

    #[error("{path}:{line}: index {index} out of range")]
    IndexOutOfRange { path: PathBuf, line: usize, index: i64 },

    #[error("unsupported bit depth {0} (expected 8 or 16)")]
    UnsupportedBitDepth(u8),

    #[error("unsupported channel layout: {0}")]
    UnsupportedChannels(String),

    #[error("image decode failure: {0}")]
    ImageDecode(String),

    #[error("bad magic: not a Radiance RGBE file")]
    BadHdrMagic,

    #[error("truncated scanline {row}")]
    TruncatedScanline { row: usize },

    #[error("malformed HDR header: {0}")]
    HdrHeader(String),

    #[error("bad checkpoint header")]
    BadCheckpointHeader,

    #[error("checkpoint format version {found} unsupported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("truncated checkpoint")]
    TruncatedCheckpoint,

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("gradient tape was recorded against parameter version {tape}, current is {current}")]
    StaleTape { tape: u64, current: u64 },

    #[error("degenerate camera: view direction is parallel to the up vector")]
    DegenerateCamera,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::NonTriangleFace { .. }
            | Error::IndexOutOfRange { .. }
            | Error::UnsupportedBitDepth(_)
            | Error::UnsupportedChannels(_)
            | Error::ImageDecode(_)
            | Error::BadHdrMagic
            | Error::TruncatedScanline { .. }
            | Error::HdrHeader(_)
            | Error::BadCheckpointHeader
            | Error::CheckpointVersion { .. }
            | Error::TruncatedCheckpoint
            | Error::ArchitectureMismatch(_)
            | Error::Manifest(_) => ErrorKind::Asset,
            Error::NonFiniteLoss { .. } => ErrorKind::Numeric,
            Error::ShapeMismatch(_)
            | Error::StaleTape { .. }
            | Error::DegenerateCamera
            | Error::InvalidArgument(_)
            | Error::EmptyDataset => ErrorKind::Config,
        }
    }
}
