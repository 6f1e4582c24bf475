use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band set: {0}")]
    InvalidBandSet(String),

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    /// Two band edges from different spectra are closer than the merge
    /// tolerance without being equal.
    #[error("ill-conditioned decomposition: edges {0} and {1} nearly coincide")]
    IllConditionedDecomposition(f64, f64),

    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),

    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),

    /// Adaptive refinement ran out of depth or panels. Carries the best
    /// available estimate and its error bound.
    #[error("quadrature did not converge: estimate {estimate}, error bound {error:e}")]
    NotConverged { estimate: Complex64, error: f64 },

    #[error("degenerate principal value: pole {pole} too close to endpoint of [{a}, {b}]")]
    DegeneratePrincipalValue { pole: f64, a: f64, b: f64 },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("integration path passes too close to the pole at {0}")]
    PoleOnPath(Complex64),

    #[error(
        "period matrix is ill-conditioned (condition number {0:e}); \
         reduce the genus or separate the bands further"
    )]
    IllConditionedPeriods(f64),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("point {0} lies on the spectrum or too close to it")]
    OnSpectrum(Complex64),

    #[error("wronskian is not constant in n (relative variance {0:e}); inputs are not solutions")]
    NonSolution(f64),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("scattering data: {0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
