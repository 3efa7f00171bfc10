use thiserror::Error;

/// Every failure mode surfaced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular or ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("matrix is not Hermitian (relative skew {skew:.3e})")]
    NotHermitian { skew: f64 },

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("matrix is not Hermitian positive definite")]
    NotHpd,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("rank-one update is singular (denominator magnitude {denom:.3e})")]
    SingularUpdate { denom: f64 },

    #[error("degenerate site: {0}")]
    Degenerate(&'static str),

    #[error("bisection bracket could not be established: {0}")]
    Bracket(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("problem too large for exhaustive search: {sites} sites (limit {limit})")]
    SizeGuard { sites: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
