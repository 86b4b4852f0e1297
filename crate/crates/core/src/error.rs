use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid response at line {line}: binarized value {value:?} is not 0 or 1")]
    InvalidResponse { line: u64, value: String },

    #[error("duplicate response for respondent {respondent}, variable {variable}, year {year}")]
    DuplicateKey {
        respondent: i64,
        variable: String,
        year: i32,
    },

    #[error("variables listed in both include and exclude filters: {0:?}")]
    FilterConflict(Vec<String>),

    #[error("no binarization entry for option set {0:?}")]
    UnmappedOptionSet(Vec<String>),

    #[error("label {label:?} is not part of option set {option_set:?}")]
    UnknownLabel { label: String, option_set: String },

    #[error("question text must not be empty")]
    EmptyQuestion,

    #[error("embedding file is missing dataset variables: {0:?}")]
    Alignment(Vec<String>),

    #[error("corrupt embedding: {0}")]
    CorruptEmbedding(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("forward cache does not match this parameter set: {0}")]
    CacheMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("feature importance undefined: first cross layer weights are all zero")]
    DegenerateImportance,

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch for tensor {0}")]
    Checksum(String),

    #[error("empty training split: {0}")]
    EmptyTraining(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("AUC is undefined: labels contain a single class")]
    UndefinedAuc,

    #[error("correlation is undefined: zero variance")]
    UndefinedCorrelation,

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("aggregation cell ({question}, {year}) has zero total weight")]
    ZeroWeight { question: usize, year: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missingness mechanism infeasible: {0}")]
    MechanismInfeasible(String),

    #[error("demographics missing for respondents: {0:?}")]
    DemographicCoverage(Vec<i64>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
