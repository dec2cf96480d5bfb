use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("undeclared identifier `{0}`")]
    UndeclaredIdentifier(String),

    #[error("no value supplied for coordinate `{0}`")]
    MissingAssignment(String),

    #[error("domain error: {func} undefined at {value}")]
    Domain { func: &'static str, value: f64 },

    #[error("model file line {line}: {message}")]
    ModelParse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("coordinate `{name}` is not allowed in {context}")]
    IllegalCoordinate { name: String, context: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular Hessian (rank {rank} of {expected})")]
    SingularHessian { rank: usize, expected: usize },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("point is off the graph of the Legendre map (defect {defect:e})")]
    OffGraph { defect: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("node {node:?} lies on the grid boundary")]
    BoundaryNode { node: Vec<usize> },

    #[error("evaluation failed at node {node:?}: {source}")]
    AtNode {
        node: Vec<usize>,
        #[source]
        source: Box<FieldError>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = FieldError> = std::result::Result<T, E>;

impl From<std::io::Error> for FieldError {
    fn from(e: std::io::Error) -> Self {
        FieldError::Io(e.to_string())
    }
}
