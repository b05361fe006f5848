use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point is off the manifold (residual {residual:e})")]
    OffManifold { residual: f64 },

    #[error("vector is not tangent at its base point (residual {residual:e})")]
    NotTangent { residual: f64 },

    #[error("degenerate parallel transport between antipodal directions")]
    DegenerateTransport,

    #[error("covariance matrix is not symmetric positive semidefinite: {0}")]
    InvalidCovariance(String),

    #[error("degenerate kernel configuration: points {0} and {1} coincide")]
    DegenerateKernels(usize, usize),

    #[error("kernel solver diverged at iteration {iteration}: loss {loss:e}")]
    SolverDiverged { iteration: usize, loss: f64 },

    #[error("degenerate direction in hyperbolic linear layer (norm {norm:e})")]
    DegenerateDirection { norm: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("empty neighborhood for node {0}")]
    EmptyNeighborhood(usize),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("non-finite value in backward pass at op `{op}` (scope `{scope}`)")]
    NumericFailure { op: &'static str, scope: String },

    #[error("non-finite loss at epoch {epoch} ({context})")]
    NonFiniteLoss { epoch: usize, context: String },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("shape mismatch for `{path}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        path: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("empty split `{0}`")]
    EmptySplit(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
