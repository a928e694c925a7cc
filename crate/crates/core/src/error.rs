//! Crate-wide error type with a coarse classification used by the CLI to
//! pick process exit codes.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error class. Maps onto CLI exit codes: usage/config errors exit
/// with 1, data errors with 2, internal errors with 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- data errors -----------------------------------------------------
    #[error("row {row}: expected 3 fields, found {found}")]
    MalformedRow { row: u64, found: usize },
    #[error("row {row}: invalid label {value:?} (expected 1 or 2)")]
    InvalidLabel { row: u64, value: String },
    #[error("row {row}: field is not valid UTF-8")]
    Encoding { row: u64 },
    #[error("dictionary line {line}: {message}")]
    DictionaryParse { line: u64, message: String },
    #[error("dictionary line {line}: duplicate surface {surface:?}")]
    DuplicateEntry { surface: String, line: u64 },
    #[error("unencodable character {ch:?} at offset {offset}")]
    Unencodable { ch: char, offset: usize },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("labels contain a single class; need both")]
    SingleClass,
    #[error("matrix has {found} columns, model expects {expected}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    // --- usage / config errors -------------------------------------------
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config: {0}")]
    Config(String),
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),

    // --- internal ---------------------------------------------------------
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MalformedRow { .. }
            | Error::InvalidLabel { .. }
            | Error::Encoding { .. }
            | Error::DictionaryParse { .. }
            | Error::DuplicateEntry { .. }
            | Error::Unencodable { .. }
            | Error::ModelFormat(_)
            | Error::EmptyCorpus
            | Error::SingleClass
            | Error::ColumnMismatch { .. }
            | Error::Csv(_) => ErrorKind::Data,
            Error::InvalidArgument(_) | Error::Config(_) | Error::MissingPath(_) => {
                ErrorKind::Usage
            }
            Error::Io(_) => ErrorKind::Internal,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> u8 {
        match self.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Internal => 3,
        }
    }

    pub(crate) fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
