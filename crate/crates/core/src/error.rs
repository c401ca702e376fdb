use std::path::PathBuf;

/// Errors produced anywhere in the categorization pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// A single input line failed validation.
    #[error("{message} at line {line}")]
    Record { line: usize, message: String },

    #[error("duplicate listing_id {id:?} at line {line}")]
    DuplicateListing { id: String, line: usize },

    #[error("invalid n-gram spec {0:?}")]
    InvalidSpec(String),

    #[error("cannot fit empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("seed group {0:?} is empty")]
    EmptySeedGroup(String),

    #[error("degenerate seed group {0:?}")]
    DegenerateSeedGroup(String),

    #[error("label vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("empty cluster")]
    EmptyCluster,

    #[error("labels missing from seed file: {}", .0.join(", "))]
    MissingLabels(Vec<String>),

    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Record { .. } => "record",
            Error::DuplicateListing { .. } => "duplicate_listing",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::EmptyCorpus => "empty_corpus",
            Error::InvalidConfig(_) => "invalid_config",
            Error::EmptySeedGroup(_) => "empty_seed_group",
            Error::DegenerateSeedGroup(_) => "degenerate_seed_group",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::EmptyCluster => "empty_cluster",
            Error::MissingLabels(_) => "missing_labels",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
