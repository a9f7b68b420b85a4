use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate matrix: no entry exceeds tolerance {0:e}")]
    Degenerate(f64),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown template id {0}")]
    UnknownTemplate(usize),

    #[error("synthesis found no solution (best cost {best_cost:.3e} at template {best_template:?})")]
    NoSolution {
        best_cost: f64,
        best_template: Option<usize>,
    },

    #[error("error bound violated: exact distance {exact:.3e} exceeds bound {bound:.3e}")]
    BoundViolated { exact: f64, bound: f64 },

    #[error("model error: {0}")]
    Model(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
