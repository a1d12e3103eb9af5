use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("density has no positive entry")]
    AllZero,

    #[error("position {position} outside domain [{x_min}, {x_max}]")]
    OutOfDomain {
        position: f64,
        x_min: f64,
        x_max: f64,
    },

    #[error("transport map is not monotone at cell {cell}")]
    NonMonotoneMap { cell: usize },

    #[error("density has no support where the transport map must be evaluated")]
    DegenerateSupport,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coupling matrix is not positive definite (smallest eigenvalue {lambda_min:.3e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("inner solver diverged: {0}")]
    InnerDiverged(String),

    #[error("Gibbs kernel underflows between neighbouring cells (epsilon {epsilon:.3e} too small for cell width {h:.3e})")]
    KernelUnderflow { epsilon: f64, h: f64 },

    #[error("time step {dt:.3e} violates the stability bound; admissible dt <= {admissible:.3e}")]
    CflViolation { dt: f64, admissible: f64 },

    #[error("negative value {value:.3e} detected at cell {cell}")]
    NegativityDetected { cell: usize, value: f64 },

    #[error("time must be positive, got {0}")]
    NonpositiveTime(f64),

    #[error("unknown record field `{0}`")]
    UnknownField(String),

    #[error("initial entropy is not finite")]
    InfiniteInitialEntropy,

    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}
