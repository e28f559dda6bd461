use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative delay {delay} (advanced arguments are not supported)")]
    NegativeDelay { delay: f64 },

    #[error("history queried at {theta}, outside the window [{lower}, 0]")]
    OutOfWindow { theta: f64, lower: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("singular Jacobian (pivot {pivot:e} at column {column})")]
    SingularJacobian { column: usize, pivot: f64 },

    #[error("non-finite residual")]
    NonFiniteResidual,

    #[error("no Hopf bifurcation: |beta| = {beta} <= |alpha| = {alpha}")]
    NoHopf { alpha: f64, beta: f64 },

    #[error("Newton converged to the equilibrium at parameter {parameter}")]
    CollapsedToEquilibrium { parameter: f64 },

    #[error("continuation failed at parameter {parameter}: {source}")]
    StepFailure {
        parameter: f64,
        #[source]
        source: Box<Error>,
        /// Last converged point, if any step succeeded before the failure.
        last: Option<Box<crate::continuation::BranchPoint>>,
    },

    #[error("function is not analytic inside the Bernstein ellipse: {0}")]
    AnalyticityViolation(String),

    #[error("unsupported format_version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
