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

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("invalid score {value} at row {row}, column {column}: scores must be finite and non-negative")]
    InvalidScore {
        row: usize,
        column: usize,
        value: f64,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("relevance matrix must have at least one consumer and one item")]
    EmptyMatrix,

    #[error("unknown item id `{0}`")]
    UnknownItem(String),

    #[error("item `{0}` has no group assignment")]
    MissingItem(String),

    #[error("item `{0}` appears in more than one group row")]
    DuplicateItemRow(String),

    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("alpha = 0 has no allocation phase and therefore no anchor point")]
    ZeroAlpha,

    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),

    #[error("eta must be finite and non-negative, got {0}")]
    InvalidEta(f64),

    #[error("slate length k must be at least 1")]
    ZeroSlateLength,

    #[error("cannot build slates of {k} distinct items from {n} items")]
    TooFewItems { n: usize, k: usize },

    #[error("cutoff {cutoff} outside 1..={k}")]
    CutoffOutOfRange { cutoff: usize, k: usize },

    #[error("total relevance is zero; quotas and fairness are undefined")]
    ZeroRelevance,

    #[error("total exposure is zero; fairness is undefined")]
    ZeroExposure,

    #[error("invalid slate for consumer `{consumer}`: {reason}")]
    InvalidSlate { consumer: String, reason: String },

    #[error("instance too large for exhaustive enumeration (m={m}, n={n}, k={k})")]
    InstanceTooLarge { m: usize, n: usize, k: usize },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by an internal consistency check rather than by
    /// the caller's input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
