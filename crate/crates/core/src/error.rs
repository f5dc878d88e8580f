use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid boundary partition: {0}")]
    InvalidPartition(String),
    #[error("offset point leaves the domain: {0}")]
    OffsetOutside(String),
    #[error("quadrature cannot resolve the patch: {0}")]
    UnresolvedQuadrature(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("CFL violated: k = {k} > h^2/(2n) = {limit}")]
    Cfl { k: f64, limit: f64 },
    #[error("solver fault at step {step}: {reason}")]
    SolverFault { step: u64, reason: String },
    #[error("fixed-point sweep did not contract at level {level} after {iterations} iterations")]
    NoContraction { level: usize, iterations: usize },
    #[error("non-monotone input: {0}")]
    NonMonotone(String),
    #[error("evaluation point too close to the boundary: {0}")]
    NearBoundary(String),
    #[error("under-resolved quadrature: {0}")]
    UnderResolved(String),
}

pub type Result<T> = core::result::Result<T, Error>;
