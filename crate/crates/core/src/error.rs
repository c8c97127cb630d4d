use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("grids differ: {0} nodes vs {1} nodes")]
    GridMismatch(usize, usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("invalid parameter `{field}`: {constraint}")]
    InvalidParameter { field: &'static str, constraint: String },

    #[error("kernel error: {0}")]
    Kernel(String),

    #[error("integration error: {0}")]
    Integration(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, constraint: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            constraint: constraint.into(),
        }
    }
}
