use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible domain spec: {0}")]
    InadmissibleSpec(String),
    #[error("unsupported dimension {dim} for {what}")]
    UnsupportedDimension { dim: usize, what: String },
    #[error("rolling-ball constraint violated: max radius of curvature {max_radius} > 1")]
    RollingBallViolation { max_radius: f64 },
    #[error("quadric fit failed at boundary vertex {vertex}")]
    QuadricFitFailure { vertex: usize },
    #[error("degenerate cell {cell} (measure {measure:e})")]
    DegenerateCell { cell: usize, measure: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("conjugate gradient exceeded {cap} iterations (relative residual {residual:e})")]
    SolverDivergence { cap: usize, residual: f64 },
    #[error("eigensolver did not converge: {0}")]
    EigenNoConvergence(String),
    #[error("quadrature tolerance not met (achieved {achieved:e})")]
    QuadratureFailure { achieved: f64 },
    #[error("exponent form u^q is not supported in dimension {0}; use the exponential disc problem")]
    UnsupportedExponentForm(usize),
    #[error("no positive solution reached from this start")]
    NonPositiveIterate,
    #[error("parameter outside domain: {0}")]
    DomainViolation(String),
    #[error("rank computation disagrees between primes: {0:?}")]
    PrimeCollision(Vec<(u64, usize)>),
    #[error("boundary is not a closed manifold: {0}")]
    NonManifoldBoundary(String),
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),
    #[error("boundary genus {0} is not zero")]
    WrongGenus(usize),
    #[error("mean curvature not positive at boundary vertex {vertex} (H = {value})")]
    NonpositiveMeanCurvature { vertex: usize, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
