use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("ragged row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric cell at row {row}, column {column}: {value:?}")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("unknown label value at row {row}: {value:?}")]
    UnknownLabel { row: usize, value: String },

    #[error("label column {0:?} not found")]
    MissingColumn(String),

    #[error("non-finite value produced: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("K-MST exhausted: tree {tree} could not span all {nodes} nodes with the remaining edges")]
    KmstExhausted { tree: usize, nodes: usize },

    #[error("inconsistent neighbor sets: {0}")]
    InconsistentNeighbors(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("enumeration cap exceeded: C(N, m) = {count} > {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code for the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyInput(_) => "empty_input",
            Error::RaggedRow { .. } => "ragged_row",
            Error::NonNumeric { .. } => "non_numeric",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::MissingColumn(_) => "missing_column",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::KmstExhausted { .. } => "kmst_exhausted",
            Error::InconsistentNeighbors(_) => "inconsistent_neighbors",
            Error::DegenerateCovariance(_) => "degenerate_covariance",
            Error::ZeroVariance(_) => "zero_variance",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::Unsupported(_) => "unsupported",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
