//! Decision-aware active learning on Gaussian-process outcome models.
//!
//! Each of `K` decisions has its own GP over the covariates. At a target
//! point the posteriors induce a distribution over which decision is best;
//! the D-EIG acquisition picks the unlabeled `(x, d)` pair whose outcome is
//! expected to shrink the entropy of that distribution the most.

pub mod acquisition;
pub mod cli;
pub mod decision;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod mathcore;
pub mod seed;

pub use error::{Error, Result};
