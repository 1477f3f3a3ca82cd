use thiserror::Error;

/// Errors raised by dataset handling, model fitting and inference.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize },
    #[error("need at least 2 rows, found {0}")]
    TooFewRows(usize),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class index {index} out of range for {classes} classes")]
    InvalidClassIndex { index: usize, classes: usize },
    #[error("feature {0} has zero variance")]
    ZeroVarianceFeature(usize),
    #[error("normal equations are singular; use a positive ridge penalty")]
    SingularSystem,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("row {row} is not excluded by any minipatch{}; increase K", feature_suffix(*.feature))]
    CoverageFailure { row: usize, feature: Option<usize> },
    #[error("feature {0} appears in every minipatch; increase K")]
    FeatureNeverExcluded(usize),
    #[error("test statistic denominator is zero (sd = 0 and barrier = 0)")]
    DegenerateDenominator,
    #[error("operation requires a {expected} task")]
    TaskMismatch { expected: &'static str },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("enumeration of {0} minipatches exceeds the limit")]
    TooLarge(u128),
    #[error("no test-point sampler attached")]
    NoSampler,
    #[error("io error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("serialization error: {0}")]
    Serialization(String),
}

fn feature_suffix(feature: Option<usize>) -> String {
    match feature {
        Some(j) => format!(" jointly with feature {j}"),
        None => String::new(),
    }
}

impl Error {
    pub fn coverage(row: usize) -> Self {
        Error::CoverageFailure { row, feature: None }
    }

    pub fn coverage_pair(row: usize, feature: usize) -> Self {
        Error::CoverageFailure {
            row,
            feature: Some(feature),
        }
    }

    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingColumn(_)
                | Error::NonNumericCell { .. }
                | Error::TooFewRows(_)
                | Error::NonFiniteValue { .. }
                | Error::ZeroVarianceFeature(_)
                | Error::InvalidClassIndex { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }

    pub fn is_coverage_failure(&self) -> bool {
        matches!(
            self,
            Error::CoverageFailure { .. } | Error::FeatureNeverExcluded(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
