use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by the model types, the engines and the chain runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("variable set {set} is not a subset of the scope {scope}")]
    NotSubset { set: String, scope: String },

    #[error("scope mismatch: {left} vs {right}")]
    ScopeMismatch { left: String, right: String },

    #[error("support violation: first distribution is positive at cell {index} where the second is zero")]
    SupportViolation { index: usize },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("parent configuration {config} has zero marginal probability")]
    ZeroMarginal { config: usize },

    #[error("order {order:?} is not a permutation of 1..={expected}")]
    NotAPermutation { order: Vec<usize>, expected: usize },

    #[error("{count} conditionals exceed the enumeration limit of {max}")]
    TooManyConditionals { count: usize, max: usize },

    #[error("replacement step not permissible: parents {parents} not within scope {scope}")]
    NotPermissibleStep { parents: String, scope: String },

    #[error("updating cycle is not permissible: {reasons}")]
    NotPermissible { reasons: String },

    #[error("joint state space has {states} states, above the oracle limit of {max}")]
    StateSpaceTooLarge { states: usize, max: usize },

    #[error("fixed point is not unique: eigenspace dimension {dimension}")]
    NonUniqueFixedPoint { dimension: usize },

    #[error("conditional at position {position} is not full; the compatibility decision needs every conditional to cover all variables")]
    NotAllFull { position: usize },

    #[error("inconsistent margins: {0}")]
    InconsistentMargins(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
