use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Root isolation could not certify a region within the depth budget;
    /// almost always a tangential or degenerate polynomial system.
    #[error("subdivision exceeded {0} levels without certifying roots")]
    MaxDepth(usize),

    /// The input polynomial is identically zero (to tolerance), so its zero
    /// set is not a finite point set.
    #[error("polynomial vanishes identically; zero set is not isolated")]
    IllPosed,

    /// Two planes handed to the surface-line solver are parallel.
    #[error("planes are parallel; their intersection is not a line")]
    DegenerateLine,

    /// Trimming found an inconsistent boundary-intersection pattern (odd
    /// crossing count, unpairable endpoints, mixed monotonicity).
    #[error("degenerate trim configuration: {0}")]
    TrimDegenerate(String),

    /// A polygon reached the partitioner that neither a kernel fan nor the
    /// two-curve quad route can decompose.
    #[error("polygon cannot be partitioned: {0}")]
    MalformedPolygon(String),

    /// Newton refinement failed to converge within its iteration budget.
    #[error("iteration failed to converge after {0} steps")]
    NoConvergence(usize),

    /// A parametrized piece has a non-positive Jacobian at a quadrature
    /// point.
    #[error("non-positive Jacobian in parametrized piece")]
    NonPositiveJacobian,

    /// The moment-fit Vandermonde system is singular.
    #[error("moment-fit system is singular")]
    SingularSystem,

    /// The linearized cut boundary does not close on the cell boundary.
    #[error("non-manifold cut boundary: {0}")]
    NonManifoldInput(String),

    /// Mesh file parsing or validation failure.
    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
