use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("bad format: {0}")]
    Format(String),

    #[error("undefined cosine")]
    UndefinedCosine,

    #[error("undefined correlation")]
    UndefinedCorrelation,

    #[error("degenerate covariance")]
    DegenerateCovariance,

    #[error("no frequency variation")]
    NoFrequencyVariation,

    #[error("nothing to predict")]
    NothingToPredict,

    #[error("nothing to probe")]
    NothingToProbe,

    #[error("missing {0}")]
    MissingPlaceholder(&'static str),

    #[error("duplicate {0}")]
    DuplicatePlaceholder(&'static str),

    #[error("prompt too long: {len} positions exceed the limit of {max}")]
    PromptTooLong { len: usize, max: usize },

    #[error("position id {position} out of range for {max} positions")]
    PositionOverflow { position: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),

    #[error("candidate {candidate:?}: {source}")]
    Candidate {
        candidate: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format(message.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_)
            | Error::MissingPlaceholder(_)
            | Error::DuplicatePlaceholder(_)
            | Error::PromptTooLong { .. }
            | Error::PositionOverflow { .. }
            | Error::DimensionMismatch { .. }
            | Error::NothingToPredict
            | Error::NothingToProbe => ErrorClass::Usage,
            Error::EmptyCorpus | Error::Parse { .. } | Error::Format(_) | Error::Io(_) => {
                ErrorClass::Data
            }
            Error::UndefinedCosine
            | Error::UndefinedCorrelation
            | Error::DegenerateCovariance
            | Error::NoFrequencyVariation
            | Error::NonFiniteLoss(_) => ErrorClass::Numerical,
            Error::Candidate { source, .. } => source.class(),
        }
    }
}
