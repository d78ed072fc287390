use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected \"TNSA\", found {found:?}")]
    BadMagic { found: Vec<u8> },

    #[error("truncated archive: {0}")]
    Truncated(String),

    #[error("malformed archive header: {0}")]
    MalformedHeader(String),

    #[error("overlapping tensor ranges: {first} and {second}")]
    OverlappingRanges { first: String, second: String },

    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),

    #[error("empty tensor name")]
    EmptyName,

    #[error("missing weight {0:?}")]
    MissingKey(String),

    #[error("unexpected weight {0:?}")]
    UnexpectedKey(String),

    #[error("weight {key:?}: expected shape {expected:?}, found {found:?}{note}")]
    WeightShape {
        key: String,
        expected: Vec<usize>,
        found: Vec<usize>,
        note: &'static str,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image decode failed: {0}")]
    Decode(String),

    #[error("invalid normalization: {0}")]
    InvalidNormalization(String),

    #[error("invalid token subset: {0}")]
    InvalidSubset(String),

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error(
        "model predicts class {predicted} ({confidence:.4}), not the requested class {requested}"
    )]
    InitialMisprediction {
        requested: usize,
        predicted: usize,
        confidence: f32,
    },

    #[error("class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("no traces to aggregate")]
    EmptyCohort,

    #[error("unknown {kind} {name:?} (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("trace {path}: {message}")]
    TraceParse { path: PathBuf, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
