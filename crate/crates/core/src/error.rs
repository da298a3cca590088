use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decomposition and scoring pipeline.
#[derive(Debug, Error)]
pub enum KoopmanError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for rank {rank}")]
    IndexOutOfRange { index: usize, rank: usize },

    #[error("data matrix has numerical rank 0; nothing to decompose")]
    RankZero,

    #[error("eigenvalue {0} is zero; continuous-time conversion is singular (infinite decay)")]
    SingularEigenvalue(String),

    #[error("kernel overflow at ({row}, {col}): {hint}")]
    KernelOverflow { row: usize, col: usize, hint: String },

    #[error("non-finite value in observable {observable} at column {column}")]
    NonFiniteObservable { observable: String, column: usize },

    #[error("degenerate eigenfunction on test set: sum of |phi(x_k)| is zero for eigenpair {index}")]
    DegenerateEigenfunction { index: usize },

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dictionary too large: q = {q} observables exceeds the limit of {limit}; use kernel DMD instead")]
    DictionaryTooLarge { q: u128, limit: u128 },

    #[error("no snapshots in {0}")]
    NoSnapshots(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by the command-line front end to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Dimension,
    Numerical,
    Io,
}

impl KoopmanError {
    pub fn class(&self) -> ErrorClass {
        use KoopmanError::*;
        match self {
            Dimension(_) | Size(_) | IndexOutOfRange { .. } | Contract(_) => ErrorClass::Dimension,
            Domain(_) | Parse { .. } | Format(_) | Json(_) | NoSnapshots(_) => ErrorClass::Parse,
            Io { .. } => ErrorClass::Io,
            RankZero
            | SingularEigenvalue(_)
            | KernelOverflow { .. }
            | NonFiniteObservable { .. }
            | DegenerateEigenfunction { .. }
            | Normalization(_)
            | UndefinedCorrelation(_)
            | Numerical(_)
            | DictionaryTooLarge { .. } => ErrorClass::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KoopmanError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = KoopmanError> = std::result::Result<T, E>;
