use thiserror::Error;

/// Errors raised by the library. Each variant names the failed condition.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("DegeneratePoint: {0}")]
    DegeneratePoint(String),
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("DegenerateGeodesic: endpoints coincide")]
    DegenerateGeodesic,
    #[error("PreconditionViolated: {0}")]
    PreconditionViolated(String),
    #[error("SideConditionViolated: z and the origin lie on mismatched sides of the axis")]
    SideConditionViolated,
    #[error("EmptyResult: no term qualifies up to index {0}")]
    EmptyResult(usize),
    #[error("NotGenerallyConvergent")]
    NotGenerallyConvergent,
    #[error("DegenerateCoefficient: a_{0} = 0")]
    DegenerateCoefficient(usize),
    #[error("ScaleTooFine: scale_min {scale_min} < 4 * resolution {resolution}")]
    ScaleTooFine { scale_min: f64, resolution: f64 },
    #[error("NoWitness: point lies in gd(E) at the probed scales")]
    NoWitness,
    #[error("RankDataInconsistent: {0}")]
    RankDataInconsistent(String),
    #[error("ConstructionStuck at pair index {0}")]
    ConstructionStuck(usize),
    #[error("DepthTooLarge: enumeration would exceed {0} points")]
    DepthTooLarge(usize),
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
