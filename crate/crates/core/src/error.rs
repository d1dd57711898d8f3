use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON at {location}: {source}")]
    Json {
        location: String,
        #[source]
        source: serde_json::Error,
    },

    /// A dump record or corpus failed validation.
    #[error("invalid record `{example_id}`: {reason}")]
    InvalidRecord { example_id: String, reason: String },

    /// Input violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate representation matrix")]
    DegenerateMatrix,

    #[error("zero-norm answer token representation")]
    ZeroNormRow,

    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,

    #[error("degenerate variance: both samples are constant")]
    DegenerateVariance,

    #[error("example `{0}` has no correctness label")]
    MissingLabel(String),

    /// Pipeline stage failure, wrapping the underlying cause.
    #[error("stage `{stage}` failed{}: {source}", example_suffix(.example_id))]
    Stage {
        stage: &'static str,
        example_id: Option<String>,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}` requires {dependency}")]
    MissingDependency {
        stage: &'static str,
        dependency: String,
    },
}

fn example_suffix(id: &Option<String>) -> String {
    id.as_ref()
        .map(|id| format!(" on example `{id}`"))
        .unwrap_or_default()
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(location: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            location: location.into(),
            source,
        }
    }

    pub(crate) fn record(example_id: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidRecord {
            example_id: example_id.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, example_id: Option<&str>) -> Self {
        Error::Stage {
            stage,
            example_id: example_id.map(str::to_owned),
            source: Box::new(self),
        }
    }

    /// True when the failure is a data-validation problem rather than a
    /// runtime fault. The CLI maps this to exit code 1.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidRecord { .. } | Error::Json { .. } | Error::MissingLabel(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
