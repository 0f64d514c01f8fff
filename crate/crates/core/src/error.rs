use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("index set covers every mode; an unfolding needs a proper subset")]
    FullIndexSet,
    #[error("mode {mode} is out of range for an order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("coordinate {tuple:?} is out of bounds for dims {dims:?}")]
    OutOfBounds { tuple: Vec<usize>, dims: Vec<usize> },
    #[error("input is empty")]
    EmptyInput,
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: coordinate {tuple:?} is out of bounds for dims {dims:?}")]
    Bounds {
        line: usize,
        tuple: Vec<usize>,
        dims: Vec<usize>,
    },
    #[error("{}duplicate entry {tuple:?}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    DuplicateEntry { line: Option<usize>, tuple: Vec<usize> },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("rank must be at least 1")]
    InvalidRank,
    #[error("row {row} of the last matricization holds {observed} observations, fewer than rank {rank}")]
    Assumption1Violated {
        row: usize,
        observed: usize,
        rank: usize,
    },
    #[error("basis entry {tuple:?} is not an observed entry")]
    BasisNotObserved { tuple: Vec<usize> },
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("slice selection is empty")]
    EmptySelection,
    #[error("slice id {id} is out of range (constraint tensor has {count} slices)")]
    SliceOutOfRange { id: usize, count: usize },

    #[error("basis system for row {row} stayed singular after {attempts} random draws")]
    SingularSystem { row: usize, attempts: usize },
    #[error("canonical pattern needs at least {rank} rows in mode {mode}, found {rows}")]
    CanonicalPatternDoesNotFit { mode: usize, rank: usize, rows: usize },

    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    InvalidEpsilon(f64),
    #[error("index-set size {isize} must satisfy 1 <= |I| < d = {order}")]
    InvalidIsize { isize: usize, order: usize },
    #[error("order d = {0} is too small; these bounds need d > 2")]
    OrderTooSmall(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
