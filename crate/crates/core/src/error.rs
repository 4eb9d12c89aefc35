use thiserror::Error;

/// Errors raised by the geometry engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinslerError {
    #[error("point {point:?} lies outside the chart of {model}")]
    ChartViolation { model: String, point: Vec<f64> },
    #[error("degenerate direction: y must be nonzero")]
    DegenerateDirection,
    #[error("degenerate flag: V is (numerically) parallel to y")]
    DegenerateFlag,
    #[error("fundamental tensor is not positive definite at x={x:?}, y={y:?}")]
    NotPositiveDefinite { x: Vec<f64>, y: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {constraint}")]
    InvalidParameter { name: String, constraint: String },
    #[error("integrator step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error("geodesic left every chart at t={t}")]
    ChartExit { t: f64 },
    #[error("distance shooting did not converge (best residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("radius {radius} exceeds the safe injectivity bound {bound}")]
    RadiusTooLarge { radius: f64, bound: f64 },
    #[error("quadrature did not converge: refinements differ by {diff:e}")]
    QuadratureNonConvergence { diff: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("model rejected: {0}")]
    ModelRejected(String),
}

pub type Result<T> = std::result::Result<T, FinslerError>;

pub(crate) fn invalid(name: &str, constraint: impl Into<String>) -> FinslerError {
    FinslerError::InvalidParameter {
        name: name.to_string(),
        constraint: constraint.into(),
    }
}
