use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signatures are not comparable: {0}")]
    IncompatibleSignatures(String),

    #[error("shingle sets are not comparable: n={0} vs n={1}")]
    IncompatibleShingles(usize, usize),

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("unknown document id {0:?}")]
    UnknownId(String),

    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),

    #[error("insufficient donor sentences: need {needed}, found {found}")]
    InsufficientDonors { needed: usize, found: usize },

    #[error("resemblance band [{low}, {high}] unreachable for document {doc_id:?} after {attempts} attempts")]
    BandUnreachable {
        doc_id: String,
        low: f64,
        high: f64,
        attempts: usize,
    },

    #[error("AUC undefined: {0}")]
    SingleClass(String),

    #[error("corpus and index disagree: {0}")]
    Mismatch(String),

    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate id {id:?} at {first} and {second}")]
    DuplicateRecord {
        id: String,
        first: String,
        second: String,
    },

    #[error("index format: {0}")]
    Format(String),

    #[error("index checksum mismatch (file truncated or corrupted)")]
    Checksum,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::IncompatibleSignatures(_) => "incompatible_signatures",
            Error::IncompatibleShingles(..) => "incompatible_shingles",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UnknownId(_) => "unknown_id",
            Error::CorpusTooSmall(_) => "corpus_too_small",
            Error::InsufficientDonors { .. } => "insufficient_donors",
            Error::BandUnreachable { .. } => "band_unreachable",
            Error::SingleClass(_) => "single_class",
            Error::Mismatch(_) => "mismatch",
            Error::MalformedRecord { .. } => "malformed_record",
            Error::DuplicateRecord { .. } => "duplicate_record",
            Error::Format(_) => "format",
            Error::Checksum => "checksum",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
