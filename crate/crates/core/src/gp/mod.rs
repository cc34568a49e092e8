//! Per-decision Gaussian-process regression with an ARD squared-exponential
//! kernel and a zero mean function.

mod kernel;
mod model;
mod optimize;

pub use kernel::ArdSeKernel;
pub use model::{
    CandidateLink, GpHyperparameters, GpModel, LatentPosterior, TargetState, DEGENERATE_VARIANCE,
    NEGATIVE_VARIANCE_TOL,
};
pub use optimize::{optimize_hyperparameters, optimize_hyperparameters_from, OptimizerSettings};
