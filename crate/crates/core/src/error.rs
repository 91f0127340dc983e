use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("row {row} of {path} has {found} fields, expected {expected}")]
    RowArity {
        path: String,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("unknown column `{column}` in table `{table}`")]
    UnknownColumn { table: String, column: String },

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("empty query column")]
    EmptyQueryColumn,

    #[error("signature length mismatch: {0} vs {1}")]
    SignatureMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{kind} `{name}` is already registered")]
    DuplicateName { kind: &'static str, name: String },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("invalid integration mapping: {0}")]
    InvalidMapping(String),

    #[error("intermediate tuple limit of {limit} exceeded ({count} tuples materialized)")]
    RowLimitExceeded { limit: usize, count: usize },

    #[error("oracle size guard exceeded: {0} candidate subsets")]
    OracleTooLarge(u128),

    #[error("column `{0}` has no numeric values")]
    NonNumeric(String),

    #[error("need at least 2 complete pairs, found {0}")]
    TooFewPairs(usize),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("corrupt index file: {0}")]
    CorruptIndex(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code, used in JSON error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv { .. } => "malformed_csv",
            Error::RowArity { .. } => "row_arity",
            Error::UnknownColumn { .. } => "unknown_column",
            Error::UnknownTable(_) => "unknown_table",
            Error::EmptyQueryColumn => "empty_query_column",
            Error::SignatureMismatch(..) => "signature_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DuplicateName { .. } => "duplicate_name",
            Error::UnknownName { .. } => "unknown_name",
            Error::InvalidMapping(_) => "invalid_mapping",
            Error::RowLimitExceeded { .. } => "row_limit_exceeded",
            Error::OracleTooLarge(_) => "oracle_too_large",
            Error::NonNumeric(_) => "non_numeric",
            Error::TooFewPairs(_) => "too_few_pairs",
            Error::ZeroVariance(_) => "zero_variance",
            Error::CorruptIndex(_) => "corrupt_index",
            Error::Json(_) => "json",
        }
    }

    /// True when the error stems from caller input rather than engine failure.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::RowLimitExceeded { .. }
                | Error::OracleTooLarge(_)
                | Error::CorruptIndex(_)
                | Error::SignatureMismatch(..)
        )
    }
}
