//! Error type shared by every stage of the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfError {
    #[error("invalid boundary grid: {0}")]
    InvalidGrid(String),
    #[error("boundary function has nonzero mean {mean:e} on component {component}")]
    NonZeroMean { component: usize, mean: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unknown surface family `{0}`")]
    UnknownFamily(String),
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),
    #[error("perturbation changes the boundary length element: {0}")]
    BoundaryLengthChanged(String),
    #[error("linear solver failed: {0}")]
    SolverFailure(String),
    #[error("solver residual {0:e} above threshold")]
    NonConvergence(f64),
    #[error("denominator 𝔇f degenerate (max |𝔇f| = {0:e})")]
    DenominatorDegenerate(f64),
    #[error("orientability probe inconclusive (margin ×{0:.2})")]
    Inconclusive(f64),
    #[error("rank ambiguous: singular-value gap ratio {0:.3e}")]
    RankAmbiguous(f64),
    #[error("no anchor found: best residual {0:e}")]
    AnchorNotFound(f64),
    #[error("codimension {found} does not match hint {hint}")]
    CodimMismatch { found: usize, hint: usize },
    #[error("transfer minimizer escaped: |d| = {d:e} > bound {bound:e}")]
    MinimizerEscaped { d: f64, bound: f64 },
    #[error("function is not in the kernel of 𝔇 (residual {0:e})")]
    NotInKernel(f64),
    #[error("point too close to curve (distance {0:e})")]
    TooCloseToCurve(f64),
    #[error("direction not admissible at this point (winding {0})")]
    NotAdmissible(i64),
    #[error("quadrature degraded: distance {0:e} below guard")]
    QuadratureDegraded(f64),
    #[error("near-boundary chart singular: {0}")]
    ChartSingular(String),
    #[error("cylinder cover incomplete: {0}")]
    CoverageGap(String),
    #[error("boundary curve not immersed for every direction")]
    ImmersionFailure,
    #[error("geodesics focus immediately (regular strip {0:e})")]
    ImmediateFocusing(f64),
    #[error("Newton refinement diverged")]
    NewtonDiverged,
    #[error("degenerate differential (smallest singular value {0:e})")]
    DegenerateDifferential(f64),
    #[error("involution equivariance broken (residual {0:e})")]
    EquivarianceBroken(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SurfError {
    /// Process exit code: 2 for configuration problems, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SurfError::Config(_)
            | SurfError::UnknownFamily(_)
            | SurfError::DegenerateParameters(_)
            | SurfError::InvalidGrid(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SurfError>;
