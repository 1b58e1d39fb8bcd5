//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FamarError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix panel must contain at least one sample")]
    EmptyPanel,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("factor dimension {k} exceeds matrix dimension {p}")]
    FactorDimension { k: usize, p: usize },

    #[error("degenerate spectrum: cannot extract {k} leading eigenvectors")]
    DegenerateSpectrum { k: usize },

    #[error("gram matrix is numerically singular (condition number {cond:.3e})")]
    SingularGram { cond: f64 },

    #[error("degenerate averaging scale |c_s * r_s| = {0:.3e}: factor identification failed")]
    DegenerateScale(f64),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("varimax rotation did not converge within {max_iter} sweeps")]
    VarimaxNonConvergence { max_iter: usize },
}

pub type Result<T> = std::result::Result<T, FamarError>;
