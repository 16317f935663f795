use thiserror::Error;

/// Every failure surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dense structural matrix requested for p = {p} (limit {limit}); use the implicit operator")]
    TooLargeForDense { p: usize, limit: usize },

    #[error("invalid position set: {0}")]
    InvalidPositions(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graphs are not nested: {0}")]
    NotNested(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("at least {required} observations are required, got {actual}")]
    SampleSize { required: usize, actual: usize },

    #[error("data are degenerate (not in general position)")]
    DegenerateData,

    #[error("invalid asymptotic scalars: {0}")]
    ScalarBounds(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not reach tolerance (estimated error {0:.3e})")]
    Quadrature(f64),

    #[error("root search failed: {0}")]
    RootBracket(String),

    #[error("invalid estimator specification: {0}")]
    Spec(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("study failed: {failures} of {replicates} replicates did not converge")]
    FailureRate { failures: usize, replicates: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by an iterative solver not converging.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NoConvergence { .. } | Error::Quadrature(_) | Error::FailureRate { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
