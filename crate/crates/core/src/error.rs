//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense materialization refused for {rows}x{cols} operator (limit {limit})")]
    DenseTooLarge {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    #[error("x-update system is singular or not positive definite")]
    SingularSystem,

    #[error("conjugate gradient failed to converge within {iters} iterations (residual {residual:.3e})")]
    CgNonConvergence { iters: usize, residual: f64 },

    #[error("solver produced non-finite iterates at iteration {iter}")]
    Divergence { iter: usize },

    #[error("regularizer not supported by {context}")]
    UnsupportedRegularizer { context: &'static str },

    #[error("target density is non-finite at the current point")]
    NonFiniteTarget,

    #[error("regularizer value is infinite at an infeasible point")]
    InfeasiblePoint,

    #[error("sample {index} (seed {seed}) failed: {source}")]
    SampleFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("gibbs iteration {iter} failed: {source}")]
    GibbsIterationFailed {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("derived per-sample seeds collide; change the master seed")]
    SeedCollision,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("ensemble contains non-finite values in sample {index}")]
    NonFiniteSample { index: usize },

    #[error("chain too short: length {len} with max_lag {max_lag}")]
    ChainTooShort { len: usize, max_lag: usize },
}
