use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    /// Returned by the inverse transform when |Phi(z)| is too close to 1;
    /// callers should evaluate through the boundary expansions instead.
    #[error("point too close to the boundary: {0}")]
    NearBoundary(String),
}

pub type Result<T> = std::result::Result<T, Error>;
