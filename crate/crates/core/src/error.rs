use thiserror::Error;

use crate::linalg::Vec2;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the laboratory can report. Variants are grouped by the
/// module that raises them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // linalg
    #[error("directions are parallel (no transversality)")]
    ParallelDirections,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("cone boundary ray is mapped onto the complementary axis")]
    DegenerateImage,
    #[error("cone half-width must lie in (0, 1], got {0}")]
    InvalidHalfWidth(f64),

    // maps
    #[error("orbit of {start:?} left the domain at step {step}")]
    OrbitEscape { start: Vec2, step: i64 },
    #[error("cocycle length {requested} exceeds the configured maximum {max}")]
    CocycleTooLong { requested: u64, max: u64 },
    #[error("invalid map parameter: {0}")]
    InvalidParameter(String),

    // periodic
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("monodromy has an eigenvalue within 1e-10 of 1")]
    SingularNewtonMatrix,

    // pliss
    #[error("thresholds must satisfy 0 < gamma1 < gamma2 < 1 (got {gamma1}, {gamma2})")]
    InvalidThresholds { gamma1: f64, gamma2: f64 },
    #[error("per-step norms must be positive and finite (index {0})")]
    InvalidNorm(usize),

    // domination
    #[error("singular values differ by less than 1e-12 relatively")]
    DegenerateSingularValues,

    // manifolds
    #[error("periodic orbit is not a saddle with real subspaces")]
    NotASaddle,
    #[error("point budget of {0} exceeded while growing the manifold")]
    PointBudgetExceeded(usize),

    // forge
    #[error("angle {gamma:e} is not below the tangency threshold {threshold:e}")]
    ThresholdViolated { gamma: f64, threshold: f64 },
    #[error("|lambda * sigma| = {product} is not below 1")]
    DissipationViolated { product: f64 },
    #[error("support box meets the chart of another orbit point")]
    DomainOverlap,
    #[error("edit of step {step} deviates by {deviation:e}, budget {budget:e}")]
    BudgetExceeded {
        step: usize,
        deviation: f64,
        budget: f64,
    },
}
