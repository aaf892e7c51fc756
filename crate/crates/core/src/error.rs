use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty compact set")]
    EmptySet,
    #[error("point on curve")]
    PointOnCurve,
    #[error("outside map domain")]
    OutsideMapDomain,
    #[error("inversion failed")]
    InversionFailed,
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("arc self-intersects under zipper")]
    ZipperSelfIntersection,
    #[error("zipper failed at eps = {eps}: {reason}")]
    ZipperFailed { eps: f64, reason: String },
    #[error("map construction failed: {0}")]
    MapConstruction(String),
    #[error("degenerate time step")]
    DegenerateTimeStep,
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("domain not strictly sub-stochastic")]
    NotSubStochastic,
    #[error("sets must be disjoint")]
    SetsNotDisjoint,
    #[error("mesh not converged: {0}")]
    MeshNotConverged(String),
    #[error("degenerate trace")]
    DegenerateTrace,
    #[error("insufficient replicas")]
    InsufficientReplicas,
    #[error("epsilon too small for sample budget")]
    EpsilonTooSmall,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
