use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("precision-exhausted divisor")]
    PrecisionExhaustedDivisor,
    #[error("non-unit argument: {0} is divisible by p")]
    NonUnitArgument(i128),
    #[error("argument is not a 1-unit")]
    NotOneUnit,
    #[error("exp-divergent argument")]
    ExpDivergent,
    #[error("no square root in base ring")]
    NoSquareRoot,
    #[error("square root of character unavailable: tame exponent {0} gives an odd character")]
    OddCharacter(i64),
    #[error("weights violate the admissibility assumption: {0}")]
    AssumptionViolated(String),
    #[error("operator defined on U=0 kernel only: input is not depleted")]
    NotDepleted,
    #[error("tail not converged at J={order}: achieved valuation {achieved} below target {target}; increase tail order or lower precision target")]
    TailNotConverged {
        order: usize,
        achieved: i64,
        target: i64,
    },
    #[error("pole of overconvergent projection: u_k - {0} is not invertible")]
    Pole(i64),
    #[error("absolute precision {achieved} fell below the floor {floor}")]
    PrecisionFloor { achieved: i64, floor: i64 },
    #[error("input outside span")]
    OutsideSpan,
    #[error("basis is not linearly independent on the computed coefficients")]
    DependentBasis,
    #[error("roots require quadratic extension")]
    NeedsQuadraticExtension,
    #[error("regularity assumption violated: repeated root")]
    RepeatedRoot,
    #[error("insufficient precision to separate factors")]
    InseparableFactors,
    #[error("iteration did not stabilize: {0}")]
    NotConverged(String),
    #[error("weight mismatch: {0}")]
    WeightMismatch(String),
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Malformed,
    Precision,
    Assumption,
    Other,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Malformed(_) => ErrorKind::Malformed,
            Error::PrecisionExhaustedDivisor
            | Error::TailNotConverged { .. }
            | Error::PrecisionFloor { .. }
            | Error::InseparableFactors
            | Error::NotConverged(_) => ErrorKind::Precision,
            Error::OddCharacter(_)
            | Error::AssumptionViolated(_)
            | Error::NotDepleted
            | Error::Pole(_)
            | Error::RepeatedRoot
            | Error::NeedsQuadraticExtension => ErrorKind::Assumption,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Other,
        }
    }

    pub fn at_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error beneath any stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
