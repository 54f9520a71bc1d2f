use std::path::PathBuf;

use crate::segmentation::MaskReason;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("operation needs a 3-channel color image")]
    GrayInput,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("histogram has no samples")]
    EmptyHistogram,
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("segmentation mask rejected: {0:?}")]
    ImplausibleMask(MaskReason),
    #[error("frame discarded: {found} dominant components, expected {expected}")]
    DiscardFrame { found: usize, expected: usize },
    #[error("finger separation failed after trimming {trimmed_rows} rows")]
    SeparationFailed { trimmed_rows: usize },
    #[error("expected 4 finger crops, got {0}")]
    WrongFingerCount(usize),
    #[error("invalid finger id {0}")]
    InvalidFingerId(u8),
    #[error("region of interest is empty after border erosion")]
    EmptyRoi,
    #[error("image {width}x{height} is smaller than the {min}x{min} sharpness window")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("no quality candidates")]
    NoCandidates,
    #[error("skeleton is not 1px thin at ({x}, {y})")]
    NotThin { x: usize, y: usize },
    #[error("template parse error: {0}")]
    Parse(String),
    #[error("template has no minutiae")]
    EmptyTemplate,
    #[error("no scores to fuse")]
    EmptyScores,
    #[error("score set needs at least one genuine and one impostor score")]
    EmptyScoreSet,
    #[error("no capture attempts recorded")]
    NoAttempts,
    #[error("capture session already closed")]
    SessionClosed,
    #[error("capture session is not done")]
    NotDone,
    #[error("external quality scorer failed: {0}")]
    ExternalScorer(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error: {0}")]
    Codec(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::GrayInput => "GrayInput",
            Error::InvalidImage(_) => "InvalidImage",
            Error::EmptyHistogram => "EmptyHistogram",
            Error::EmptyMask => "EmptyMask",
            Error::ImplausibleMask(_) => "ImplausibleMask",
            Error::DiscardFrame { .. } => "DiscardFrame",
            Error::SeparationFailed { .. } => "SeparationFailed",
            Error::WrongFingerCount(_) => "WrongFingerCount",
            Error::InvalidFingerId(_) => "InvalidFingerId",
            Error::EmptyRoi => "EmptyROI",
            Error::TooSmall { .. } => "TooSmall",
            Error::NoCandidates => "NoCandidates",
            Error::NotThin { .. } => "NotThin",
            Error::Parse(_) => "ParseError",
            Error::EmptyTemplate => "EmptyTemplate",
            Error::EmptyScores => "EmptyScores",
            Error::EmptyScoreSet => "EmptyScoreSet",
            Error::NoAttempts => "NoAttempts",
            Error::SessionClosed => "SessionClosed",
            Error::NotDone => "NotDone",
            Error::ExternalScorer(_) => "ExternalScorer",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Codec(_) => "CodecError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
