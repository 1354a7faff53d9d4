use thiserror::Error;

/// Errors produced by the quench engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}, column {column}: {kind}")]
    Parse {
        line: usize,
        column: usize,
        kind: ParseErrorKind,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid time {0:?}: must be a finite nonnegative decimal")]
    InvalidTime(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    /// A computation would exceed its configured resource limit.
    #[error("resource guard: {what} needs {requested}, limit is {limit}")]
    ResourceGuard {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    #[error("time {time} lies outside the validity window t^2 j_max^2 <= 1/(2 n^4) for n = {n}, j_max = {j_max}")]
    OutsideWindow { n: usize, j_max: u64, time: String },

    #[error("precision escalation exhausted at {bits} bits: error bar {error_bar:e} above target {target:e}")]
    PrecisionExhausted {
        bits: u32,
        error_bar: f64,
        target: f64,
    },

    /// An exactness invariant failed. This always indicates a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, kind: ParseErrorKind) -> Self {
        Error::Parse { line, column, kind }
    }

    /// True for errors caused by a resource guard rather than bad input.
    pub fn is_resource_guard(&self) -> bool {
        matches!(self, Error::ResourceGuard { .. })
    }
}

/// What went wrong while reading a matrix file.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("missing header line with the matrix size")]
    MissingHeader,
    #[error("malformed header {0:?}: expected a single positive integer")]
    MalformedHeader(String),
    #[error("matrix size must be at least 1")]
    ZeroSize,
    #[error("row {row} has {found} entries, expected {expected}")]
    RowLength {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("found {found} rows, expected {expected}")]
    MissingRows { found: usize, expected: usize },
    #[error("token {0:?} is not an integer")]
    NotAnInteger(String),
    #[error("entry {0} does not fit in a signed 64-bit integer")]
    EntryOverflow(String),
    #[error("unexpected content after the last row")]
    TrailingContent,
    #[error("invalid JSON matrix: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
