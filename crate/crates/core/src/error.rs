use std::path::PathBuf;

use crate::condmodels::Family;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    /// `row` is the 1-based data row (the header is not counted).
    #[error("row {row}, column `{column}`: cannot parse {value:?} ({reason})")]
    Parse {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("row {row}, column `{column}`: log transform needs a strictly positive value, got {value}")]
    NonPositiveLog { row: usize, column: String, value: f64 },

    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),

    #[error("invalid variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("degenerate cdf pair ({lower}, {upper}): observed value has zero probability")]
    DegeneratePair { lower: f64, upper: f64 },

    #[error("value {value} is outside the support of the {family} model")]
    OutsideSupport { family: Family, value: f64 },

    #[error("{family} model is continuous; discrete cdf pairs are undefined")]
    ContinuousFamily { family: Family },

    #[error("response is not compatible with the {family} family: {reason}")]
    IncompatibleResponse { family: Family, reason: String },

    #[error("design matrix is rank deficient ({0})")]
    RankDeficient(String),

    #[error("{family} fit did not converge after {iterations} iterations")]
    NonConvergence { family: Family, iterations: usize },

    #[error("complete separation detected in logistic fit")]
    Separation,

    #[error("every candidate count model failed: {0}")]
    AllFitsFailed(String),

    #[error("covariate layout mismatch: expected {expected} values, got {got}")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("column `{column}` has level `{level}` that was not seen at fit time")]
    UnseenLevel { column: String, level: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error is caused by the caller's data or configuration
    /// rather than by a failure inside the library.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::NonConvergence { .. } | Error::AllFitsFailed(_) | Error::Json(_)
        )
    }
}
