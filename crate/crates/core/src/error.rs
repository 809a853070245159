use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: unknown label '{label}'")]
    UnknownLabel { line: usize, label: String },

    #[error("line {line}: stop time {stop} is not after start time {start}")]
    EmptyInterval { line: usize, start: f64, stop: f64 },

    #[error("line {line}: event [{start}, {stop}) overlaps the previous event")]
    Overlap { line: usize, start: f64, stop: f64 },

    #[error("line {line}: duplicate pair ({ref_path}, {hyp_path})")]
    DuplicatePair {
        line: usize,
        ref_path: String,
        hyp_path: String,
    },

    #[error("duration mismatch: {0}")]
    DurationMismatch(String),

    #[error("label sets differ between accumulated counts")]
    LabelSetMismatch,

    #[error("hypothesis event [{start}, {stop}) has no confidence but a threshold is in effect")]
    MissingConfidence { start: f64, stop: f64 },

    #[error("no hypothesis confidences present")]
    NoConfidences,

    #[error("no observations to score")]
    NoObservations,

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("invalid label map: {0}")]
    LabelMap(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    InFile { path: PathBuf, source: Box<Error> },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by the run configuration rather than the data.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config(_) | Error::LabelMap(_) => true,
            Error::InFile { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
