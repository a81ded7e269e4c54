use thiserror::Error;

/// Every failure mode of the library. The CLI maps these onto exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("metric is degenerate (dgn = {0})")]
    DegenerateMetric(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("subspace is not transverse to the chart complement (margin {0:.3e})")]
    NotTransverse(f64),
    #[error("no common Lagrangian complement found after {0} attempts")]
    SearchExhausted(usize),
    #[error("quadruple is not admissible: {0}")]
    Admissibility(String),
    #[error("symplecticity drift {0:.3e} exceeds the allowed bound")]
    SymplecticityLost(f64),
    #[error("unresolved root cluster near t = {0}")]
    UnresolvedCluster(f64),
    #[error("final instant b = {0} is focal")]
    FinalInstantFocal(f64),
    #[error("charting failed near t = {0}")]
    ChartingFailed(f64),
    #[error("metric is not positive definite")]
    NotPositiveDefinite,
    #[error("metric restricted to the tangent space is degenerate")]
    DegenerateTangent,
    #[error("polynomial join failed: {0}")]
    JoinFailed(String),
    #[error("singular limit at t = {0}: orders do not cancel")]
    SingularLimit(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
