use thiserror::Error;

/// Failures raised by the solver pipeline.
///
/// Variants split into two families: input/discretization problems
/// (`InvalidGrid`, `InvalidParameter`, ...) and mathematically meaningful
/// solver outcomes (`BallEscape`, `Divergence`, `BracketNotFound`, ...).
/// [`Error::is_solver_failure`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at node {index} (r = {r})")]
    NonFinite { index: usize, r: f64 },

    #[error("bracket [{lo}, {hi}] does not straddle the localized solution")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NotConverged { iterations: usize, last_change: f64 },

    #[error("discretized operator is singular (zero pivot at row {row})")]
    SingularMatrix { row: usize },

    #[error("iterate left the trust ball: norm {norm:e} > delta {delta:e} at iteration {iteration}")]
    BallEscape {
        norm: f64,
        delta: f64,
        iteration: usize,
    },

    #[error("iteration diverging: successive differences grew for 3 steps (iteration {iteration})")]
    Divergence { iteration: usize },

    #[error("fit window holds {nodes} nodes, need at least 10")]
    WindowTooSmall { nodes: usize },

    #[error("field vanishes identically on the fit window")]
    VanishingField,

    #[error("position |x| = {r} outside profile range (0, {r_max}]")]
    OutOfRange { r: f64, r_max: f64 },

    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("continuation failed at epsilon = {epsilon}: {source}")]
    Continuation {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error reports a violated mathematical hypothesis
    /// (no contraction, no bracket, no convergence) rather than bad input.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::BracketNotFound { .. }
            | Error::NotConverged { .. }
            | Error::SingularMatrix { .. }
            | Error::BallEscape { .. }
            | Error::Divergence { .. } => true,
            Error::Continuation { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
