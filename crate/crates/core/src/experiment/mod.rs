//! Replication harness: synthetic data, train/pool/target splits, the
//! sequential acquisition loop and aggregation across replications.

mod dataset;
mod replication;
mod split;
mod study;
mod synthetic;

pub use dataset::{PotentialOutcomesDataset, Provenance};
pub use replication::{
    run_replication, AcquisitionSettings, GpSettings, MetricStep, MetricTrace, PiChoice, Replication,
};
pub use split::{split, Split, SplitSpec};
pub use study::{aggregate, run_study, AggregateRow, ReplicationOutcome, StudyResult, StudySpec};
pub use synthetic::{generate_synthetic, SyntheticConfig};
