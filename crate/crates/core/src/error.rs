use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("generator matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("generator matrix is empty")]
    EmptyGenerator,

    #[error("generator entry q[{i}][{j}] = {value} is not finite")]
    NonFiniteEntry { i: usize, j: usize, value: f64 },

    #[error("generator entry q[{i}][{j}] = {value} is a negative off-diagonal rate")]
    NegativeOffDiagonal { i: usize, j: usize, value: f64 },

    #[error("generator row {row} sums to {sum}, expected 0")]
    RowSumNonzero { row: usize, sum: f64 },

    #[error("matrix exponential did not converge: {0}")]
    NonConvergent(String),

    #[error("coefficient lists have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("parameter out of domain: {0}")]
    DomainError(String),

    #[error(
        "residual decomposition needs a scalar model, got dimension {dim} with {drivers} drivers"
    )]
    DimensionUnsupported { dim: usize, drivers: usize },

    #[error("invalid time step {dt} for horizon {horizon}")]
    InvalidStep { horizon: f64, dt: f64 },

    #[error("regime {regime} is out of range for a chain with {n_states} states")]
    RegimeOutOfRange { regime: usize, n_states: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("a path overflowed; sup over the finite prefix is {partial}")]
    OverflowPresent { partial: f64 },

    #[error("every one of the {n_replications} replications overflowed")]
    AllOverflowed { n_replications: usize },

    #[error("need at least {needed} replications, got {got}")]
    TooFewReplications { needed: usize, got: usize },

    #[error("convergence fit needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("step sizes must be positive and distinct and span at least 2 decades (span {span_decades:.3})")]
    InsufficientSpan { span_decades: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("quadrature did not converge at lambda_dt={lambda_dt}, alpha={alpha}, p={p}")]
    QuadratureNonConvergent { lambda_dt: f64, alpha: f64, p: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
