use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("space must have at least one coordinate")]
    EmptySpace,
    #[error("{0} integer coordinates exceeds the supported maximum of 30")]
    TooManyIntegerDims(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate {coord} = {value} is not integral")]
    NotIntegral { coord: usize, value: f64 },
    #[error("constraint row has no nonzero coefficient")]
    ZeroRow,
    #[error("constraint data must be finite")]
    NonFinite,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("branch and bound exceeded {0} nodes")]
    NodeLimit(usize),
    #[error("singular active set")]
    Singular,
    #[error("basis re-solve changed the optimum")]
    BasisMismatch,
    #[error("basis requested for a non-optimal result")]
    NotOptimal,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node id {0} out of range")]
    NodeOutOfRange(usize),
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("invalid graph parameters: {0}")]
    InvalidParameters(String),
    #[error("no graph with the requested diameter after {0} attempts")]
    ResampleCap(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid probability level {0}; must lie in (0, 1)")]
    InvalidLevel(f64),
    #[error("invalid uncertainty set: {0}")]
    InvalidSet(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error("node {node}: local problem reported {status:?}")]
    LocalSolve {
        node: u32,
        status: crate::milp::SolveStatus,
    },
    #[error("communication schedule is not jointly strongly connected with L = {0}")]
    NotJointlyConnected(usize),
    #[error("unsupported instance schema version {0}")]
    Schema(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
