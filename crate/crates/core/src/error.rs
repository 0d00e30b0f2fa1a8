use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed record at {location}: {message}")]
    Malformed { location: String, message: String },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("duplicate utterance id '{0}'")]
    DuplicateUtterance(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("sequence of length {len} is shorter than filter width {width}")]
    SequenceTooShort { len: usize, width: usize },
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("non-finite feature value in {0}")]
    RejectNonFinite(String),
    #[error("training data contains a single class")]
    ClassDegenerate,
    #[error("modality {0} requested but not present")]
    MissingModality(char),
    #[error("label schemes are incompatible: {0}")]
    SchemeIncompatible(String),

    #[error("fold constraint violated: {0}")]
    FoldConstraint(String),
    #[error("split error: {0}")]
    Split(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("output directory {0} is not empty; pass --overwrite to replace it")]
    OutputExists(PathBuf),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutputExists(_) => 2,
            Error::NonFinite(_) => 4,
            _ => 3,
        }
    }
}
