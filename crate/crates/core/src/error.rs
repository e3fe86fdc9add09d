use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("kernel invariant violated: {0}")]
    KernelInvariant(String),

    #[error("degree {requested} exceeds series truncation {truncation}")]
    BeyondTruncation { requested: usize, truncation: usize },

    #[error("point lies on or outside the unit sphere (norm {0})")]
    OutsideBall(f64),

    #[error("kernel is not CNP: b_{index} < 0")]
    NotCnp { index: usize },

    #[error("not a factorization: g_{index} = {value} < 0")]
    NotAFactorization { index: usize, value: String },

    #[error("not a 1/k-contraction: minimum eigenvalue {min_eigenvalue:e}")]
    NotContraction { min_eigenvalue: f64 },

    #[error("operator series did not converge by degree {cap} (last increment {increment:e})")]
    NoConvergence { cap: usize, increment: f64 },

    #[error("tuple is not pure (purity residual {residual:e})")]
    NotPure { residual: f64 },

    #[error("tuple does not commute (residual {0:e})")]
    NotCommuting(f64),

    #[error("basis is not orthonormal (residual {0:e})")]
    NotOrthonormal(f64),

    #[error("u is ill-defined: |Pi Gamma^+ Gamma - Pi| = {0:e}")]
    UIllDefined(f64),

    #[error("T-tilde is not a contraction: minimum eigenvalue {0:e}")]
    TtildeNotContraction(f64),

    #[error("two routes disagree: {what} (difference {difference:e})")]
    Disagreement { what: String, difference: f64 },

    #[error("empty k-inner space: largest eigenvalue of G is {0}")]
    EmptyKInner(f64),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("gram mismatch: {0:e}")]
    GramMismatch(f64),

    #[error("exact route unavailable: {0}")]
    ExactUnavailable(String),
}
