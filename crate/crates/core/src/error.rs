use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("spacing mismatch: {left:?} vs {right:?}")]
    SpacingMismatch { left: Vec<f64>, right: Vec<f64> },

    #[error("class count mismatch: {left} vs {right}")]
    ClassCountMismatch { left: usize, right: usize },

    #[error("kernel rank {kernel} does not match volume rank {volume}")]
    RankMismatch { kernel: usize, volume: usize },

    #[error("rater set is empty")]
    EmptyRaterSet,

    #[error("no probabilities above the threshold {threshold} in any class")]
    NoCalibrationSamples { threshold: f64 },

    #[error("calibration bins are empty or inconsistent: {0}")]
    InvalidBins(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the operating system (missing files, permissions),
    /// false for anything caused by invalid content or arguments.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

/// Problems found while decoding a volume file or its sidecar.
#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic: expected \"SVLV\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported version {found} (expected 1)")]
    UnsupportedVersion { found: u8 },

    #[error("unknown dtype code {found}")]
    UnknownDtype { found: u8 },

    #[error("header field `{field}` is invalid: {reason}")]
    InvalidHeader { field: &'static str, reason: String },

    #[error("truncated {section}: expected {expected} bytes, found {found}")]
    Truncated {
        section: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },

    #[error("payload value at voxel {voxel:?} is invalid: {reason}")]
    InvalidVoxel { voxel: Vec<usize>, reason: String },

    #[error("sidecar field `{field}` is invalid: {reason}")]
    InvalidSidecar { field: &'static str, reason: String },

    #[error("expected a {expected} volume, file holds {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
}
