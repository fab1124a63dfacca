//! Error type shared by every pipeline stage.

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::Label;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    #[error("row {row}: unknown label `{value}`")]
    UnknownLabel { row: usize, value: String },

    #[error("row {row}: requirement text is empty")]
    EmptyText { row: usize },

    #[error("dataset contains no records")]
    EmptyDataset,

    #[error("no term survives vocabulary filtering")]
    EmptyVocabulary,

    #[error("invalid vocabulary file: {0}")]
    VocabularyFormat(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix has no rows")]
    EmptyMatrix,

    #[error("link refers to row {index} but matrix has {rows} rows")]
    StaleLinks { index: usize, rows: usize },

    #[error("training data contains a single class ({0}); a discriminative model needs at least two")]
    SingleClassTraining(Label),

    #[error("operation `{operation}` is not supported by model `{kind}`")]
    UnsupportedModel {
        operation: &'static str,
        kind: &'static str,
    },

    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: {left} truth labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("label {0} is not in the class list")]
    UnknownClass(Label),

    #[error("no reports to aggregate")]
    EmptyInput,

    #[error("class {label} has {count} rows, fewer than the {folds} folds requested")]
    ClassTooSmall {
        label: Label,
        count: usize,
        folds: usize,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Stable, greppable identifier for the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::Csv(_) => "E_CSV",
            Error::Json(_) => "E_JSON",
            Error::MissingColumn(_) => "E_MISSING_COLUMN",
            Error::UnknownLabel { .. } => "E_UNKNOWN_LABEL",
            Error::EmptyText { .. } => "E_EMPTY_TEXT",
            Error::EmptyDataset => "E_EMPTY_DATASET",
            Error::EmptyVocabulary => "E_EMPTY_VOCABULARY",
            Error::VocabularyFormat(_) => "E_VOCABULARY_FORMAT",
            Error::DimensionMismatch { .. } => "E_DIMENSION_MISMATCH",
            Error::EmptyMatrix => "E_EMPTY_MATRIX",
            Error::StaleLinks { .. } => "E_STALE_LINKS",
            Error::SingleClassTraining(_) => "E_SINGLE_CLASS",
            Error::UnsupportedModel { .. } => "E_UNSUPPORTED_MODEL",
            Error::InvalidParameter(_) => "E_INVALID_PARAMETER",
            Error::LengthMismatch { .. } => "E_LENGTH_MISMATCH",
            Error::UnknownClass(_) => "E_UNKNOWN_CLASS",
            Error::EmptyInput => "E_EMPTY_INPUT",
            Error::ClassTooSmall { .. } => "E_CLASS_TOO_SMALL",
            Error::Fold { source, .. } => source.code(),
            Error::Config(_) => "E_CONFIG",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
