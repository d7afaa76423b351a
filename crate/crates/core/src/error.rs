use thiserror::Error;

use crate::network::ConnectivityReport;

/// Message used whenever maximum likelihood is requested on a network that
/// is not strongly connected.
pub const NOT_CONNECTED_MESSAGE: &str =
    "Network is not fully connected - cannot estimate all item parameters with npseudo = 0";

#[derive(Debug, Error)]
pub enum Error {
    #[error("at least two items are required, got {0}")]
    TooFewItems(usize),
    #[error("negative rank {value} in row {row}, column {col}")]
    NegativeRank { row: usize, col: usize, value: i64 },
    #[error("row {row} has {got} entries, expected {expected}")]
    RowLength {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("duplicate item name `{0}`")]
    DuplicateItem(String),
    #[error("item names must be nonempty")]
    EmptyItemName,
    #[error("item name `{0}` is reserved")]
    ReservedItemName(String),
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("item `{item}` appears more than once in row {row}")]
    DuplicateInRow { row: usize, item: String },
    #[error("invalid weight {value} for row {row}")]
    InvalidWeight { row: usize, value: f64 },
    #[error("weights vector has length {got}, expected {expected}")]
    WeightLength { got: usize, expected: usize },
    #[error("invalid grouping: {0}")]
    InvalidGroup(String),
    #[error("tie of {size} items exceeds the maximum tie order {max}")]
    TieOrderExceeded { size: usize, max: usize },
    #[error("maximum tie order {0} is above 4; set the high tie order override to proceed")]
    TieOrderGuard(usize),
    #[error("enumeration supports at most 6 items, got {0}")]
    EnumerationTooLarge(usize),
    #[error("{}", NOT_CONNECTED_MESSAGE)]
    NotConnected(ConnectivityReport),
    #[error("no valid rankings to fit")]
    EmptyData,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("information matrix is singular; the item network may be only weakly connected")]
    SingularInformation,
    #[error("item `{0}` has a positive observed statistic but zero expectation")]
    ZeroExpectation(String),
    #[error("line search failed after {iterations} iterations: {reason} (max discrepancy {discrepancy:e})")]
    LineSearch {
        iterations: usize,
        reason: String,
        discrepancy: f64,
    },
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("unknown reference item `{0}`")]
    UnknownReference(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("covariate error: {0}")]
    Covariate(String),
    #[error("category `{value}` of covariate `{covariate}` was not seen when the tree was grown")]
    UnseenCategory { covariate: String, value: String },
    #[error("decode error in row {row}: {msg}")]
    Decode { row: usize, msg: String },
    #[error("row {row} is missing {missing} codes, expected exactly one")]
    Complete { row: usize, missing: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
