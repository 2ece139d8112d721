use thiserror::Error;

/// Errors produced by design construction, statistic evaluation and the
/// benchmark engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Construction or configuration parameters violate a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A threshold grid contains no points.
    #[error("empty grid: {0}")]
    EmptyGrid(String),

    /// A CSV payload could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A statistic failed inside a benchmark cell; the cell identifier and
    /// trial index are attached so grid runs abort with a precise location.
    #[error("cell {cell}, trial {trial}: {source}")]
    CellFailure {
        cell: String,
        trial: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn in_cell(self, cell: impl Into<String>, trial: u32) -> Error {
        Error::CellFailure {
            cell: cell.into(),
            trial,
            source: Box::new(self),
        }
    }
}
