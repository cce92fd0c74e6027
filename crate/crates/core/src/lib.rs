//! Exact independent sampling from implicitly defined "regularized Gaussian"
//! distributions, by solving randomized regularized linear least-squares
//! problems, with applications to uncertainty quantification for Bayesian
//! linear inverse problems.
//!
//! The central object is the pushforward of a Gaussian through a proximal
//! operator: drawing `b̂ ~ N(b, λ⁻¹I)` (and optionally `ĉ ~ N(c, δ⁻¹I)`) and
//! solving
//!
//! ```text
//! argmin_x  λ/2 ‖Ax − b̂‖² + δ/2 ‖Lx − ĉ‖² + f(x)
//! ```
//!
//! yields one independent sample. Unlike continuous posteriors, these
//! distributions put positive probability on sparse vectors (exact zeros,
//! exactly flat regions), which is what the [`faces`] module quantifies.
//!
//! Module map:
//! - [`linops`]: matrix-free linear operators (blur, finite differences,
//!   parallel-beam projector, compositions).
//! - [`prox`]: regularizer descriptions and proximal-operator atoms.
//! - [`admm`]: the ADMM solver behind every sample.
//! - [`sampler`]: perturb-then-optimize draws and ensembles.
//! - [`faces`]: polyhedral face dimensions `dim(F(x))` of sparse patterns.
//! - [`gibbs`]: hierarchical Gibbs samplers over (λ, δ) or (λ, γ).
//! - [`baseline`]: random-walk Metropolis on the continuous comparison
//!   posterior.
//! - [`problems`]: deblurring / CT experiment builders.
//! - [`stats`]: ensemble summaries and chain diagnostics.

pub mod admm;
pub mod baseline;
pub mod error;
pub mod faces;
pub mod gibbs;
pub mod linops;
pub mod numeric;
pub mod problems;
pub mod prox;
pub mod sampler;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
pub use linops::LinearMap;
pub use prox::{Atom, BlockPartition, RegValue, Regularizer, Term};
