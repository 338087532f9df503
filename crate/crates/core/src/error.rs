use std::path::PathBuf;

/// Errors produced anywhere in the charting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure at iteration {iteration}: {what}")]
    Numerical { iteration: usize, what: String },

    #[error("degenerate dissimilarity row {row}: all distances are zero (duplicate test points?)")]
    DegenerateRow { row: usize },

    #[error("search budget exceeded: {required} evaluations required, budget is {budget}")]
    BudgetExceeded { required: usize, budget: usize },

    #[error("combination {index}: {source}")]
    Combination {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scene file {path}: {message}")]
    Scene { path: String, message: String },

    #[error("missing input file {}: {hint}", path.display())]
    MissingInput { path: PathBuf, hint: String },

    #[error("malformed file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
