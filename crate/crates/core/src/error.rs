use thiserror::Error;

use crate::dynamics::ConditionReport;
use crate::maxerg::LimitDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("eigensolver did not converge on a {dim}x{dim} block")]
    NonConvergence { dim: usize },

    #[error("function undefined at eigenvalue {eigenvalue:e}")]
    DomainError { eigenvalue: f64 },

    #[error("eigenvalue {eigenvalue:e} lies within {eps:e} of the cut point {cut:e}")]
    AmbiguousSpectralCut { eigenvalue: f64, cut: f64, eps: f64 },

    #[error("invalid exponent p = {0}; expected p >= 1 or p = inf")]
    InvalidExponent(f64),

    #[error("matrix is not hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("non-finite entry in matrix")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("density is not faithful (minimum eigenvalue {min_eigenvalue:e})")]
    NotFaithful { min_eigenvalue: f64 },

    #[error("density is not normalized (trace {trace})")]
    NotNormalized { trace: f64 },

    #[error("density is ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("map does not preserve hermiticity (defect {defect:e})")]
    NotHermiticityPreserving { defect: f64 },

    #[error("map fails the contraction, positivity or trace-decrease condition: {0}")]
    ConditionsNotMet(Box<ConditionReport>),

    #[error("kernel is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("reference measure is not sub-invariant: {0}")]
    NotSubInvariant(String),

    #[error("not a unital *-subalgebra: {0}")]
    NotSubalgebra(String),

    #[error("random map generation failed after {attempts} rescaling attempts")]
    GenerationFailure { attempts: usize },

    #[error("no stable limit point among the computed projections")]
    NoStableLimit { diagnostics: Box<LimitDiagnostics> },

    #[error("reference is not a tracial weight")]
    NotTracial,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::NoStableLimit { .. } | Error::AmbiguousSpectralCut { .. })
    }
}
