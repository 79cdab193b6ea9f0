use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian (asymmetry {0:.3e})")]
    NonHermitianInput(f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("potential basis is linearly dependent (rank {rank} < {count})")]
    LinearlyDependentBasis { rank: usize, count: usize },

    #[error("expectation value has imaginary part {0:.3e}")]
    NonRealExpectation(f64),

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("potential images do not commute (commutator norm {0:.3e})")]
    NotAbelian(f64),

    #[error("polytope is a single point")]
    DegeneratePolytope,

    #[error("no weights lie on the facet hyperplane")]
    EmptyFacet,

    #[error("density is not representable (violation {0:.3e})")]
    NotRepresentable(f64),

    #[error("subset enumeration of {0} combinations exceeds the supported limit")]
    Unsupported(u128),

    #[error("domain is not a simplex over the sector permanents")]
    NotSimplexSetting,

    #[error("search did not converge (best constraint residual {0:.3e})")]
    DidNotConverge(f64),

    #[error("ground state is degenerate ({} branches)", branches.len())]
    DegenerateGroundState { branches: Vec<(Vec<f64>, f64)> },

    #[error("density does not lie in the relative interior of the domain")]
    NotInRelativeInterior,

    #[error("facet point has an empty facet-theory fiber")]
    CriticalFacetPoint,

    #[error("off-facet weight has zero distance to the facet")]
    ZeroDenominator,

    #[error("facet is not nice")]
    NotNiceFacet,

    #[error("state does not lie on the facet (distance {0:.3e})")]
    NotOnFacet(f64),

    #[error("unsupported algebra: {0}")]
    UnsupportedAlgebra(String),

    #[error("weights do not diagonalize simultaneously (deviation {0:.3e})")]
    NotSimultaneouslyDiagonalizable(f64),

    #[error("image polytope is not full-dimensional (dimension {found} < {expected})")]
    NotFullDimensional { expected: usize, found: usize },

    #[error("no candidate inequality survived screening")]
    NoCandidates,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
