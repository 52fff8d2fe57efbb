use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("row count mismatch: x has {x_rows} rows, y has {y_rows}")]
    Alignment { x_rows: usize, y_rows: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate robust scale in column {column}")]
    DegenerateScale { column: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{block} block is singular (smallest eigenvalue {min_eigenvalue:e})")]
    Singular {
        block: &'static str,
        min_eigenvalue: f64,
    },

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("divergence at iteration {iteration}: non-finite gradient")]
    Divergence { iteration: usize },

    #[error("kernel matrix is ill-conditioned even with jitter {jitter:e}")]
    Conditioning { jitter: f64 },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
