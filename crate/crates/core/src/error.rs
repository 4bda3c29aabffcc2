use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structured input (partition, profile, transport, rectangle) is malformed.
    #[error("validation error: {0}")]
    Validation(String),

    /// The ratio condition on the rearranged exponent has no witness on the grid.
    #[error("condition not witnessed at this depth: {0}")]
    NotWitnessed(String),

    #[error("base too small for divergence: c = {c} must exceed e^(1/d) = {threshold}")]
    BaseTooSmall { c: f64, threshold: f64 },

    #[error("grid too shallow for one stage: total mass {total} < 1")]
    GridTooShallow { total: f64 },

    /// A rectangle with unequal per-axis levels was passed where a cube is required.
    #[error("rectangle levels differ ({0:?}); decompose first")]
    DecomposeFirst(Vec<u32>),

    #[error("level {level} exceeds the bit budget of {budget} digits")]
    BitBudget { level: u32, budget: u32 },

    /// A construction invariant failed; indicates a discretization bug.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
