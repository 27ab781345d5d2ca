use std::path::PathBuf;

use crate::data::ViewKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("feature panels share no feature ids")]
    EmptyIntersection,
    #[error("feature panels differ: {0}")]
    FeatureMismatch(String),
    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),
    #[error("duplicate feature id `{0}`")]
    DuplicateFeature(String),
    #[error("view mismatch: expected {expected:?}, found {found:?}")]
    ViewMismatch { expected: ViewKind, found: ViewKind },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("expression matrix is empty")]
    EmptyMatrix,
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("training data must contain at least two classes, found {0}")]
    DegenerateLabels(usize),
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("target pair table is empty")]
    EmptyTable,
    #[error("no feature of the {view:?} panel is covered by the target table")]
    NoCoverage { view: ViewKind },
    #[error("no unlabeled pool shares features with the labeled set")]
    NoOverlap,
    #[error("class sets differ between views: {0:?} vs {1:?}")]
    ClassSetMismatch(Vec<String>, Vec<String>),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample `{0}` has no label")]
    MissingLabel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("configurations use different test sets: {0}")]
    TestSetMismatch(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any [`Error::Context`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
