use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the decoding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("unpaired stimulus id {0:?}")]
    UnpairedStimulus(String),

    #[error("duplicate stimulus id {0:?}")]
    DuplicateStimulus(String),

    #[error("unknown stimulus id {0:?}")]
    UnknownStimulus(String),

    #[error("non-finite value in {blob} blob for stimulus {stimulus:?} at flat offset {offset}")]
    NonFinite {
        stimulus: String,
        blob: &'static str,
        offset: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("empty baseline window [{start_ms}, {end_ms}) ms")]
    EmptyBaselineWindow { start_ms: f64, end_ms: f64 },

    #[error("{target} ms is not an integer multiple of {base} ms")]
    NonIntegerRatio { target: f64, base: f64 },

    #[error("unknown channel name(s): {}", .0.join(", "))]
    UnknownChannel(Vec<String>),

    #[error("frame period mismatch for stimulus {stimulus:?}: recording {recording_ms} ms, spectrogram {spectrogram_ms} ms")]
    FramePeriodMismatch {
        stimulus: String,
        recording_ms: f64,
        spectrogram_ms: f64,
    },

    #[error("spectrogram of {stimulus:?} has {frames} frames but recording covers only {available} post-onset frames (tolerance {tolerance})")]
    SpectrogramTooLong {
        stimulus: String,
        frames: usize,
        available: usize,
        tolerance: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ill-conditioned normal equations (reciprocal condition {rcond:e}); use a ridge penalty")]
    IllConditioned { rcond: f64 },

    #[error("kernel matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("degenerate leverage at row {row} for lambda {lambda:e} (1 - h = {slack:e})")]
    DegenerateLeverage { row: usize, lambda: f64, slack: f64 },

    #[error("clip {stimulus:?} has {samples} samples, shorter than one {window}-sample window")]
    ClipTooShort {
        stimulus: String,
        samples: usize,
        window: usize,
    },

    #[error("filter edge {edge_hz} Hz exceeds Nyquist frequency {nyquist_hz} Hz")]
    AboveNyquist { edge_hz: f64, nyquist_hz: f64 },

    #[error("fold ({id_a}, {id_b}) failed: {source}")]
    Fold {
        id_a: String,
        id_b: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::IllConditioned { .. }
            | Error::NotPsd { .. }
            | Error::DegenerateLeverage { .. } => true,
            Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
