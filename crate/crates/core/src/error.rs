use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("bad {kind} file: {reason}")]
    Format { kind: &'static str, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("speaker {speaker} has {available} utterances, {needed} needed")]
    InsufficientUtterances {
        speaker: String,
        available: usize,
        needed: usize,
    },
    #[error("empty signal")]
    EmptySignal,
    #[error("signal of {len} samples is shorter than one frame ({frame} samples)")]
    SignalTooShort { len: usize, frame: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("autocorrelation lag {lag} must be below frame length {len}")]
    LagTooLarge { lag: usize, len: usize },
    #[error("zero-lag autocorrelation is not positive")]
    NonPositiveEnergy,
    #[error("{frames} frames is too few (need {needed})")]
    TooFewFrames { frames: usize, needed: usize },
    #[error("{points} points is too few (need {needed})")]
    TooFewPoints { points: usize, needed: usize },
    #[error("dimension {dim} has zero variance")]
    DegenerateData { dim: usize },
    #[error("dimension mismatch: model {model}, data {data}")]
    DimMismatch { model: usize, data: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("no items to score")]
    Empty,
    #[error("no result rows")]
    EmptyRows,
    #[error("[{frontend}] {stage}: {source}")]
    Stage {
        frontend: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            kind,
            reason: reason.into(),
        }
    }

    /// True for errors caused by unreadable or malformed files.
    pub fn is_io_or_format(&self) -> bool {
        match self {
            Error::Io { .. }
            | Error::Format { .. }
            | Error::NotWav(_)
            | Error::UnsupportedEncoding(_)
            | Error::Truncated(_) => true,
            Error::Stage { source, .. } => source.is_io_or_format(),
            _ => false,
        }
    }
}
