use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain does not intersect grid")]
    EmptyDomain,

    #[error("exterior datum: {0}")]
    ExteriorDatum(String),

    #[error("kernel singularity: points coincide")]
    Singularity,

    #[error("self-interaction: cells overlap")]
    SelfInteraction,

    #[error("region overlaps the cell it is paired with")]
    RegionOverlap,

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("interaction table needs {needed} entries, budget is {budget}; use on-the-fly evaluation")]
    MemoryBudget { needed: usize, budget: usize },

    #[error("phase index {0} out of range")]
    PhaseOutOfRange(usize),

    #[error("weight count {got} does not match phase count {expected}")]
    WeightCount { expected: usize, got: usize },

    #[error("cell {0} is outside the domain")]
    CellOutsideDomain(usize),

    #[error("angle {0} outside the domain of F (must satisfy 0 <= alpha < pi)")]
    AngleDomain(f64),

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("point is not on the boundary: {0}")]
    NotOnBoundary(String),

    #[error("principal value extrapolation did not converge: {0:?}")]
    Extrapolation(Vec<f64>),

    #[error("config: {0}")]
    Config(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
