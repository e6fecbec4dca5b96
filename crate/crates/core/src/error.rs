use thiserror::Error;

/// Errors raised anywhere in the engine.
///
/// Numerical failures carry enough context (root, time, minor) to locate the
/// breakdown; solvers attach the failing time when they truncate a run.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unsupported algebra: series {series}, rank {rank}")]
    UnsupportedAlgebra { series: String, rank: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid root key {0:?}")]
    RootKey(String),

    #[error("root {root} hits a pole of the r-matrix: |alpha(q)| = {value:e}")]
    Domain { root: String, value: f64 },

    #[error("spin coefficient on simple root {root} is {value}, outside the real chart")]
    OutOfChart { root: String, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("leading principal minor {minor} vanishes (pivot {pivot:e}): outside the big cell")]
    BigCell { minor: usize, pivot: f64 },

    #[error("diagonal block {block} is singular: outside the big cell")]
    SingularBlock { block: usize },

    #[error("entry ({row},{col}) = {value:e} violates the parabolic zero pattern")]
    Pattern { row: usize, col: usize, value: f64 },

    #[error("logarithm branch error: {0}")]
    Branch(String),

    #[error("eigenvalue path breakdown: {0}")]
    PathBreakdown(String),

    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Accuracy { estimate: f64, tolerance: f64 },

    #[error("unknown tag {0:?}")]
    UnknownTag(String),

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, t: f64) -> Error {
        match self {
            Error::AtTime { .. } => self,
            other => Error::AtTime { t, source: Box::new(other) },
        }
    }

    /// The innermost error, with any time annotation removed.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
