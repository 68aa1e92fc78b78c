use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}: file is empty")]
    EmptyFile(PathBuf),
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown column `{0}` (not declared in the schema file)")]
    UnknownColumn(String),
    #[error("column `{0}` is declared in the schema file but missing from the data")]
    MissingColumn(String),
    #[error("non-binary label at row {row}: `{value}`")]
    NonBinaryLabel { row: usize, value: String },
    #[error("unparsable value `{value}` in column `{column}` at row {row}")]
    UnparsableValue {
        column: String,
        row: usize,
        value: String,
    },
    #[error("unknown category `{value}` in column `{column}` at row {row}")]
    UnknownCategory {
        column: String,
        row: usize,
        value: String,
    },
    #[error("schema file: {0}")]
    SchemaFile(String),
    #[error("config: {0}")]
    Config(String),
    #[error("external predictor protocol: {0}")]
    Protocol(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] flexcf_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/configuration, 2 bad input data,
    /// 3 anything that went wrong while running.
    pub fn exit_code(&self) -> i32 {
        use flexcf_core::Error as C;
        match self {
            Error::Config(_) => 1,
            Error::EmptyFile(_)
            | Error::Csv(_)
            | Error::UnknownColumn(_)
            | Error::MissingColumn(_)
            | Error::NonBinaryLabel { .. }
            | Error::UnparsableValue { .. }
            | Error::UnknownCategory { .. }
            | Error::SchemaFile(_) => 2,
            Error::Core(e) => match e {
                C::InvalidFraction(_)
                | C::InvalidModel(_)
                | C::InvalidConfig(_)
                | C::InvalidThreshold(_)
                | C::UnsortedThresholds
                | C::InvalidEpsilon(_)
                | C::InvalidFilter(_)
                | C::InvalidFixture(_) => 1,
                C::InvalidSchema { .. }
                | C::InvalidRow { .. }
                | C::SchemaMismatch { .. }
                | C::EmptyDataset
                | C::EmptySplit { .. }
                | C::SingleClass
                | C::ZeroRange(_)
                | C::InsufficientEligible { .. } => 2,
                _ => 3,
            },
            Error::Io { .. } | Error::Protocol(_) | Error::Json(_) => 3,
        }
    }
}
