use rand::seq::SliceRandom;

use super::dataset::PotentialOutcomesDataset;
use crate::error::{Error, Result};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub n_train: usize,
    pub seed: u64,
}

/// Disjoint training rows, pool rows and a single target row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub pool: Vec<usize>,
    pub target: usize,
    /// Ground-truth best decision at the target.
    pub best_decision: usize,
}

pub fn split(ds: &PotentialOutcomesDataset, spec: &SplitSpec) -> Result<Split> {
    let n = ds.len();
    if spec.n_train == 0 || spec.n_train + 1 >= n {
        return Err(Error::config(
            "n_train",
            format!("must be in 1..{} for a dataset of {n} rows", n.saturating_sub(1)),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(spec.seed, &[]));
    let target = order[spec.n_train];
    let mut train = order[..spec.n_train].to_vec();
    let mut pool = order[spec.n_train + 1..].to_vec();
    train.sort_unstable();
    pool.sort_unstable();
    Ok(Split {
        train,
        pool,
        target,
        best_decision: ds.best_decision(target),
    })
}
