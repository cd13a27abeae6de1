use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("resolution too small: axis {axis} has {nodes} nodes, need at least 3")]
    Resolution { axis: usize, nodes: usize },

    #[error("domain has no interior nodes")]
    EmptyInterior,

    #[error("window is not aligned to grid nodes: {0}")]
    Window(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid weight: {0}")]
    Weight(String),

    #[error("inadmissible data: {0}")]
    Inadmissible(String),

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("transform table: {0}")]
    Transform(String),

    #[error(
        "fixed-point iteration stalled after {iterations} iterations (last update {residual:e})"
    )]
    Picard { iterations: usize, residual: f64 },

    #[error("no admissible pole: best margin {margin:e} is below {threshold:e}")]
    NoPole { margin: f64, threshold: f64 },

    #[error("sphere data: {0}")]
    Sphere(String),

    #[error("invalid options: {0}")]
    Options(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
