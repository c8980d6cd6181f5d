use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point lies outside the domain (coordinate {coordinate}: {value})")]
    DomainViolation { coordinate: usize, value: f64 },

    #[error("all weights h_i(x) vanish at the evaluation point")]
    DegenerateWeight,

    #[error("active index {index} has a vanishing weight h_i(x)")]
    DegenerateActiveWeight { index: usize },

    #[error("active set is empty")]
    EmptyActiveSet,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not off-diagonal sign-constant")]
    NotSignConstant,

    #[error("matrix is not irreducible ({scc_count} strongly connected components)")]
    NotIrreducible { scc_count: usize },

    #[error("matrix has a negative entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("no start point with a defined ratio could be found")]
    InfeasibleStart,

    #[error("every start hit the iteration cap ({iterations}) without meeting a tolerance")]
    IterationCap { iterations: usize },

    #[error("grid oracle supports n <= 3, got n = {n}")]
    DimensionTooLarge { n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sampling requires a finite sub-box")]
    MissingSamplingBox,

    #[error("continuation start is not a solution (residual {residual:e})")]
    StartInfeasible { residual: f64 },

    #[error("corrector diverged after {halvings} step halvings")]
    CorrectorDivergence { halvings: usize },

    #[error("parameter `{name}` must be positive, got {value}")]
    NonpositiveParameter { name: &'static str, value: f64 },

    #[error("bad exponent: {0}")]
    BadExponent(String),

    #[error("parse error in {context} at line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown identifier `{name}` in {context}")]
    UnknownIdentifier { context: String, name: String },
}
