use thiserror::Error;

/// Errors raised by the solvers and model constructors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PegError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown corpus entry `{0}`")]
    UnknownCorpus(String),

    #[error("gap vector does not sum to 1 (sum = {sum})")]
    GapSum { sum: f64 },

    #[error("vertex tuple is not in counter-clockwise order (arc total {total})")]
    InconsistentVertices { total: f64 },

    #[error("edge ratios violate the polygon inequality")]
    PolygonInequality,

    #[error("distance field is not positive off the diagonal (min {min})")]
    NotPositive { min: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error(
        "Newton corrector did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("iterate left the interior (boundary distance {distance:e})")]
    BoundaryExit { distance: f64 },

    #[error("continuation exceeded {0} steps")]
    MaxSteps(usize),

    #[error("corrector diverged during tracing at step {step}")]
    Divergence { step: usize },

    #[error("branch is not closed")]
    OpenBranch,

    #[error("solution set is not isolated: {0}")]
    SolutionFamily(String),

    #[error("search failed: {0}")]
    NotFound(String),

    #[error("fat-diagonal guard violated (min separation {min_separation})")]
    FatDiagonal { min_separation: f64 },
}

pub type Result<T> = std::result::Result<T, PegError>;
