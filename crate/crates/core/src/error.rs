use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("objects live on different meshes or quadrature rules: {0}")]
    MeshMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("singular matrix ({context}): pivot failure at index {index}")]
    SingularMatrix { context: String, index: usize },

    #[error("linear solve failed ({context}): relative residual {residual:.3e}")]
    SolveFailed { context: String, residual: f64 },

    #[error("layer depth is not positive: min D = {min_depth:.6e} in cell {cell}")]
    NonPositiveDepth { cell: usize, min_depth: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations; residual history {history:?}")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("mesh format error at line {line}: {message}")]
    MeshFormat { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
