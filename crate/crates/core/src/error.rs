use thiserror::Error;

/// Errors produced by the screening library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KifError {
    #[error("length mismatch: {left} != {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {required} observations, got {got}")]
    TooFewObservations { required: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("empty label vector")]
    EmptyLabels,

    #[error("labels must contain at least 2 distinct classes, found {found}")]
    TooFewClasses { found: usize },

    #[error("insufficient class size: class {class} ({label}) has {size} observation(s), need at least 2")]
    InsufficientClassSize {
        class: usize,
        label: String,
        size: usize,
    },

    #[error("class index {class} out of range (K = {classes})")]
    UnknownClass { class: usize, classes: usize },

    #[error("dataset needs at least 2 features, got {got}")]
    TooFewFeatures { got: usize },

    #[error("feature matrix has {cells} cells, expected n*p = {n}*{p}")]
    ShapeMismatch { cells: usize, n: usize, p: usize },

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid pair ({j}, {l}) for p = {p}")]
    InvalidPair { j: usize, l: usize, p: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid simulation spec: {0}")]
    InvalidSimulation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, KifError>;

impl From<std::io::Error> for KifError {
    fn from(err: std::io::Error) -> Self {
        KifError::Io(err.to_string())
    }
}

impl From<csv::Error> for KifError {
    fn from(err: csv::Error) -> Self {
        KifError::Csv(err.to_string())
    }
}
