use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes or lengths that do not fit together.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// Requested PSI overlap counts exceed the available pool.
    #[error("infeasible prior support: {0}")]
    InfeasiblePsi(String),
    /// A basis or design matrix failed the full-rank test.
    #[error("rank deficient: singular value ratio {ratio:e} is below tolerance")]
    RankDeficient { ratio: f64 },
    /// NaN or infinite input.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// A closed-form bound was evaluated outside the domain of its formula.
    #[error("formula domain violated: {0}")]
    Domain(String),
    /// Exact enumeration would exceed the configured cap.
    #[error("exact enumeration needs {pairs} pairs, cap is {cap}")]
    EnumerationCap { pairs: u128, cap: u128 },
    /// A certificate was asked to consume a sampled (lower-bound) coherence.
    #[error("sampled coherence for block length {0} rejected without override")]
    SampledCoherence(usize),
    /// File or format problems.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
