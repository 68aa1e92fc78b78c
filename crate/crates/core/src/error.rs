use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("feature `{name}`: {reason}")]
    InvalidSchema { name: String, reason: String },
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("expected {expected} feature values, found {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("train_fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("empty split: {train} train rows, {test} test rows")]
    EmptySplit { train: usize, test: usize },
    #[error("fixture: {0}")]
    InvalidFixture(String),

    #[error("training data contains a single class")]
    SingleClass,
    #[error("invalid model parameter: {0}")]
    InvalidModel(String),
    #[error("model failure: {0}")]
    Model(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("factual is already predicted desirable")]
    AlreadyDesirable,
    #[error("zero valid counterfactuals found")]
    NoCounterfactuals,

    #[error("continuous feature `{0}` has a non-positive range")]
    ZeroRange(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("empty counterfactual list")]
    EmptyCounterfactuals,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("instances were scored under different thresholds")]
    MixedThresholds,
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("filter: {0}")]
    InvalidFilter(String),
    #[error("insufficient eligible instances: need {needed}, found {found}")]
    InsufficientEligible { needed: usize, found: usize },
    #[error("region/counterfactual mismatch: {0}")]
    RegionMismatch(String),
    #[error("feature sets differ: {0}")]
    FeatureMismatch(String),
}
