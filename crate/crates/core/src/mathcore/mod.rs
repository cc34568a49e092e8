//! Deterministic numerical primitives shared by the rest of the crate.
//!
//! Entropies are in nats throughout.

mod cholesky;
mod entropy;
mod quadrature;

pub use cholesky::{cholesky, CholeskyFactor, JITTER_CAP_FACTOR, JITTER_START_FACTOR};
pub use entropy::{discrete_entropy, gaussian_entropy, normal_cdf, normal_pdf, NORMALIZATION_TOL};
pub use quadrature::{expect_gaussian, gauss_hermite, gauss_legendre, QuadratureRule, DEFAULT_ORDER, MAX_ORDER};
