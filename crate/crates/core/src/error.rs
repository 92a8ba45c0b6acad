use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operands carry different deformation matrices")]
    ThetaMismatch,

    #[error("operands carry different truncation policies")]
    PolicyMismatch,

    #[error("support overflow in strict mode: exponent {exponent:?} outside box of radius {r_max}")]
    SupportOverflow { exponent: Vec<i32>, r_max: i32 },

    #[error("invalid deformation matrix: {0}")]
    InvalidTheta(String),

    #[error("axis {axis} out of range for n = {n}")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("truncation box radius {r_max} is smaller than twice the input support radius {radius}")]
    BoxTooSmall { r_max: i32, radius: i32 },

    #[error("not idempotent: residual {0:e}")]
    NotIdempotent(f64),

    #[error("not a projection: idempotency residual {idempotency:e}, self-adjointness residual {self_adjointness:e}")]
    NotProjection {
        idempotency: f64,
        self_adjointness: f64,
    },

    #[error("expected a {expected} connection")]
    WrongConvention { expected: &'static str },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("vector lies outside the module (residual {0:e})")]
    OutsideModule(f64),

    #[error("internal cross-check failed: {what} ({left:e} vs {right:e})")]
    CrossCheck {
        what: &'static str,
        left: f64,
        right: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
