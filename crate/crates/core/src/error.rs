use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("model validation failed: {0}")]
    Validation(ValidationReport),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("support of the matrix is reducible; strongly connected components: {components:?}")]
    Reducible { components: Vec<Vec<usize>> },
    #[error("Perron solver did not converge (residual {residual:.3e})")]
    NonConvergence { residual: f64 },
    #[error("inconsistent linear system (residual {residual:.3e})")]
    Inconsistent { residual: f64 },
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("enumeration would need {rows} rows, above the cap of {cap}; lower k or use Monte Carlo sampling")]
    EnumerationCap { rows: u128, cap: usize },
    #[error("exponent {value:.3e} exceeds the overflow guard {limit}; rescale theta")]
    Overflow { value: f64, limit: f64 },
    #[error("reachable-space dimensions differ ({left} vs {right}); the pair cannot be equivalent")]
    RankMismatch { left: usize, right: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("numerically indeterminate: {0}")]
    Indeterminate(String),
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
    #[error("parse error: {0}")]
    Parse(String),
}
