//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enum.
///
/// Variants are grouped by origin: data-model invariant violations,
/// parse failures, statistical preconditions, and numerical failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unknown query id `{0}`")]
    MissingQuery(String),

    #[error("duplicate doc id `{doc}` for query `{query}`")]
    DuplicateDoc { query: String, doc: String },

    #[error("line {line}: run tag `{found}` does not match `{expected}` from the first line")]
    MixedRunTags {
        expected: String,
        found: String,
        line: u64,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },

    #[error("conflicting grades for query `{query}`, doc `{doc}`: {existing} vs {new}")]
    ConflictingGrade {
        query: String,
        doc: String,
        existing: u32,
        new: u32,
    },

    #[error("conflicting metadata for doc `{0}`")]
    ConflictingMeta(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("query `{0}` has no relevant documents")]
    NoRelevant(String),

    #[error("runs and qrels share no queries")]
    NoCommonQueries,

    #[error("query universes do not match: {0}")]
    MismatchedQueries(String),

    #[error("system sets do not match: {0}")]
    MismatchedSystems(String),

    #[error("need at least 2 systems, got {0}")]
    TooFewSystems(usize),

    #[error("need at least 2 paired observations, got {0}")]
    TooFewQueries(usize),

    #[error("bucket contains no system pairs")]
    EmptyBucket,

    #[error("missing metadata for doc `{0}`")]
    MissingMeta(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("exact enumeration needs {subsets} subsets (budget {budget}); use monte_carlo mode")]
    EnumerationBudget { subsets: u128, budget: u64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("json error: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
