use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate index {0} in exclusion set")]
    DuplicateIndex(usize),
    #[error("exclusion set holds at most two indices, got {0}")]
    ExclusionTooLarge(usize),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("argument must be nonnegative, got {0}")]
    Negative(i64),
    #[error("phase {theta} outside (-n*pi/2, n*pi/2) for n = {n}")]
    PhaseOutOfDomain { n: usize, theta: f64 },
    #[error("phase out of supported range")]
    PhaseOutOfRange,
    #[error("dimension must be at least {min}, got {n}")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("entries must be finite and positive")]
    NotPositive,
    #[error("root certification failed: {0}")]
    RootCertification(String),
    #[error("a not on the phase level set (|H(a) - theta| = {0:e})")]
    NotOnLevelSet(f64),
    #[error("no positive completion")]
    NoPositiveCompletion,
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("denominator {0:e} is not positive")]
    DenominatorNonPositive(f64),
    #[error("integration failed: {0}")]
    IntegrationFailed(String),
    #[error("bracket failure: {0}")]
    BracketFailure(String),
    #[error("integral may diverge (m = {0} <= 2)")]
    IntegralMayDiverge(f64),
    #[error("no decay to fit: {0}")]
    NoDecay(String),
    #[error("repeated root in partial fraction decomposition")]
    RepeatedRoot,
    #[error("point lies inside the closed ellipsoid (r_A = {r}, gamma = {gamma})")]
    InsideEllipsoid { r: f64, gamma: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("inadmissible data: {0}")]
    Inadmissible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
