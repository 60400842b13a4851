use thiserror::Error;

/// Errors produced anywhere in the design pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptexError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid criterion: {0}")]
    InvalidCriterion(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("regressors do not span R^{m} (rank {rank})")]
    RankDeficient { m: usize, rank: usize },

    #[error("information matrix is singular (lambda_min/lambda_max = {ratio:e})")]
    SingularInformation { ratio: f64 },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("column space of X is not contained in the column space of N(w)")]
    ColumnSpaceViolation,

    #[error("covariance bound ({row}, {col}) is not finite")]
    InfiniteBound { row: usize, col: usize },

    #[error("invalid covariance bounds: {0}")]
    InvalidBounds(String),

    #[error("replication caps give total capacity {capacity} < N = {runs}")]
    InfeasibleCaps { capacity: usize, runs: usize },

    #[error("no feasible nonsingular starting design found after {draws} draws")]
    NoFeasibleStart { draws: usize },

    #[error("{count} designs exceed the enumeration cap {cap}")]
    TooLarge { count: u128, cap: u128 },

    #[error("no feasible design with a nonsingular information matrix")]
    NoFeasibleDesign,

    #[error("problem is infeasible")]
    Infeasible,

    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),

    #[error("model has no objective")]
    MissingObjective,

    #[error("duplicate variable or row name `{0}`")]
    NameCollision(String),

    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("model structure: {0}")]
    Structure(String),

    #[error("solver linkage check failed: {0}")]
    Linkage(String),
}

pub type Result<T, E = OptexError> = std::result::Result<T, E>;
