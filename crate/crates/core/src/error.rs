use thiserror::Error;

/// Errors raised by the bundle machinery, the drivers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("the cutting-plane model is undefined for an empty bundle")]
    EmptyBundle,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("weights are not in the unit simplex (violation {violation:e})")]
    NotInSimplex { violation: f64 },

    #[error(
        "proximal QP stopped after {iterations} iterations with KKT residual {residual:e} \
         (tolerance {tolerance:e})"
    )]
    QpNotConverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
        best: Box<crate::qp::QpSolution>,
    },

    #[error(
        "inner loop hit its cap of {cap} iterations with model gap {achieved_gap:e} \
         (tolerance {tolerance:e})"
    )]
    InnerCapExceeded {
        cap: usize,
        achieved_gap: f64,
        tolerance: f64,
        best_point: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("no complexity bound is available for variant `{0}`")]
    NoBound(&'static str),

    #[error("outer step {step} failed: {source}")]
    Run {
        step: usize,
        #[source]
        source: Box<Error>,
        partial: Box<crate::trace::RunTrace>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
