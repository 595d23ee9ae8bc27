use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmvError {
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("no Cayley phase succeeded after {0} attempts")]
    CayleyDegenerate(usize),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("coefficient at site {0} has operator norm too close to 1")]
    NormTooLarge(i64),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("site {0} is outside the available window")]
    OutOfWindow(i64),
    #[error("spectral parameter z vanishes")]
    ZeroArgument,
    #[error("expected leading coefficient z^{exponent} at site {k} is numerically zero")]
    MissingLeadingTerm { k: i64, exponent: i32 },
    #[error("families do not share a common range")]
    DepthMismatch,
    #[error("measure is degenerate at degree {0}")]
    DegenerateMeasure(usize),
    #[error("spectral parameter collides with an atom")]
    NodeCollision,
    #[error("series constant term is not invertible")]
    NonInvertibleConstantTerm,
    #[error("conversion needs the coefficient at the anchor site")]
    MissingAlpha,
    #[error("Wronskian is singular")]
    SingularWronskian,
    #[error("window too narrow for order {order}: need radius {needed}")]
    WindowTooNarrow { order: usize, needed: i64 },
    #[error("contraction condition fails (ratio {0:.3e})")]
    ContractionViolated(f64),
    #[error("perturbation-bound hypotheses fail: {0}")]
    HypothesisViolated(String),
    #[error("constant term of h is not invertible")]
    HNotInvertible,
    #[error("anchor coefficient is not invertible")]
    AlphaNotInvertible,
    #[error("order {0} of the Riccati series could not be solved")]
    SeriesOrderSolveFailed(usize),
    #[error("moments up to index {needed} required, {available} supplied")]
    InsufficientMoments { needed: usize, available: usize },
    #[error("bad configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, CmvError>;
