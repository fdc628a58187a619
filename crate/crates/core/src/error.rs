use thiserror::Error;

use crate::dual::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("bad grid: {0}")]
    BadGrid(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("multiplier combination {value} at node {node} is outside the interior of the conjugate domain")]
    LinkDomain { node: usize, value: f64 },

    #[error("basis is rank deficient (singular value ratio {ratio:e})")]
    RankDeficientBasis { ratio: f64 },

    #[error("infeasible targets: {0}")]
    InfeasibleTargets(String),

    #[error("variance must be positive, got {0}")]
    BadVariance(f64),

    #[error("no interior starting multipliers: {0}")]
    InitFailure(String),

    #[error("no strictly interior feasible point: {0}")]
    NoInteriorPoint(String),

    #[error("solver did not converge: {reason}")]
    NotConverged {
        reason: String,
        best: Option<Box<SolveReport>>,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}
