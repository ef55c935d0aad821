use thiserror::Error;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension n = {0} (supported: 3 <= n <= 4)")]
    InvalidDimension(usize),
    #[error("invalid radii: r_inner = {r_inner}, r_outer = {r_outer}")]
    InvalidRadii { r_inner: f64, r_outer: f64 },
    #[error("insufficient resolution: {nodes} nodes per axis, need at least {needed}")]
    InsufficientResolution { nodes: usize, needed: usize },
    #[error("stencil out of domain at x = {at:?}")]
    StencilOutOfDomain { at: Vec<f64> },
    #[error("radius {radius} outside the chart ({r_inner}, {r_outer})")]
    RadiusOutOfChart { radius: f64, r_inner: f64, r_outer: f64 },
    #[error("unsupported dimension {n} for {what}")]
    UnsupportedDimension { n: usize, what: &'static str },
    #[error("insufficient derivatives: {0}")]
    InsufficientDerivatives(String),
    #[error("metric not positive definite at x = {at:?} (smallest pivot {pivot:e})")]
    MetricNotPositiveDefinite { at: Vec<f64>, pivot: f64 },
    #[error("unsupported valence ({cov}, {con})")]
    UnsupportedValence { cov: usize, con: usize },
    #[error("incompatible valence: {0}")]
    IncompatibleValence(String),
    #[error("|h|_g = {norm} >= 3 at x = {at:?}")]
    HTooLarge { norm: f64, at: Vec<f64> },
    #[error("direction support touches the chart boundary")]
    SupportTouchesBoundary,
    #[error("too few radii: got {got}, need {need}")]
    TooFewRadii { got: usize, need: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid transition radius {0}")]
    InvalidTransitionRadius(f64),
    #[error("linear solver did not converge: residual {residual:e} after {iterations} iterations")]
    SolverNotConverged { iterations: usize, residual: f64 },
    #[error("source does not decay: {0}")]
    SourceNondecaying(String),
    #[error("fit window too small: {0}")]
    WindowTooSmall(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    #[error("target outside trust radius: |target - base| = {size:e} > {radius:e}")]
    TargetTooLarge { size: f64, radius: f64 },
    #[error("linear solver stalled: {0}")]
    LinearSolverStalled(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("family {family} does not support n = {n}")]
    UnsupportedDimensionForFamily { family: String, n: usize },
    #[error("io error: {0}")]
    Io(String),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("dataset convention is {0:?}, expected \"paper\"")]
    ConventionNotPaper(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
