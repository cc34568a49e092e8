use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;

use super::dataset::PotentialOutcomesDataset;
use super::replication::{AcquisitionSettings, GpSettings, MetricTrace, Replication};
use super::split::SplitSpec;
use crate::acquisition::Strategy;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub replications: usize,
    pub strategies: Vec<Strategy>,
    pub n_acq: usize,
    pub n_train: usize,
    pub base_seed: u64,
    pub gp: GpSettings,
    pub acquisition: AcquisitionSettings,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub strategy: Strategy,
    pub trace: std::result::Result<MetricTrace, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub strategy: Strategy,
    pub step: usize,
    pub mean_accuracy: f64,
    pub sem_accuracy: f64,
    pub mean_entropy: f64,
    pub sem_entropy: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub outcomes: Vec<ReplicationOutcome>,
    pub table: Vec<AggregateRow>,
}

impl StudyResult {
    pub fn rows_for(&self, strategy: Strategy) -> impl Iterator<Item = &AggregateRow> {
        self.table.iter().filter(move |r| r.strategy == strategy)
    }
}

/// Mean and standard error of the mean (sample variance over `n`); zero SEM
/// for a single value.
pub(crate) fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per strategy and step statistics over the successful replications.
pub fn aggregate(outcomes: &[ReplicationOutcome], strategies: &[Strategy], n_acq: usize) -> Vec<AggregateRow> {
    let mut table = Vec::new();
    for &strategy in strategies {
        let mine: Vec<_> = outcomes.iter().filter(|o| o.strategy == strategy).collect();
        let n_failed = mine.iter().filter(|o| o.trace.is_err()).count();
        for step in 0..=n_acq {
            let (acc, ent): (Vec<f64>, Vec<f64>) = mine
                .iter()
                .filter_map(|o| o.trace.as_ref().ok())
                .filter_map(|t| t.steps.get(step))
                .map(|s| (if s.correct { 1.0 } else { 0.0 }, s.entropy))
                .unzip();
            let (mean_accuracy, sem_accuracy) = mean_sem(&acc);
            let (mean_entropy, sem_entropy) = mean_sem(&ent);
            table.push(AggregateRow {
                strategy,
                step,
                mean_accuracy,
                sem_accuracy,
                mean_entropy,
                sem_entropy,
                n_ok: acc.len(),
                n_failed,
            });
        }
    }
    table
}

/// Runs every strategy on `replications` shared splits of `ds`. Replication
/// `m` uses the split seed `derive_seed(base_seed, [m])` for all strategies.
pub fn run_study(ds: &PotentialOutcomesDataset, spec: &StudySpec) -> Result<StudyResult> {
    if spec.replications == 0 {
        return Err(Error::config("replications", "must be at least 1"));
    }
    if spec.strategies.is_empty() {
        return Err(Error::config("strategies", "at least one strategy is required"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;

    let per_replication: Vec<Vec<ReplicationOutcome>> = pool.install(|| {
        (0..spec.replications)
            .into_par_iter()
            .map(|m| run_one(ds, spec, m))
            .collect()
    });
    let outcomes: Vec<_> = per_replication.into_iter().flatten().collect();
    let table = aggregate(&outcomes, &spec.strategies, spec.n_acq);
    Ok(StudyResult { outcomes, table })
}

fn run_one(ds: &PotentialOutcomesDataset, spec: &StudySpec, m: usize) -> Vec<ReplicationOutcome> {
    let split = SplitSpec {
        n_train: spec.n_train,
        seed: derive_seed(spec.base_seed, &[m as u64]),
    };
    let prepared = Replication::prepare(ds, &split, &spec.gp, &spec.acquisition);
    let mut summary = BTreeMap::new();
    let outcomes = spec
        .strategies
        .iter()
        .map(|&strategy| {
            let trace = match &prepared {
                Ok(rep) => rep.run(strategy, spec.n_acq).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            match &trace {
                Ok(t) => {
                    summary.insert(strategy.name(), t.steps.last().map(|s| s.entropy).unwrap_or(f64::NAN));
                }
                Err(e) => warn!("replication {m} ({strategy}) failed: {e}"),
            }
            ReplicationOutcome {
                replication: m,
                strategy,
                trace,
            }
        })
        .collect();
    let line: Vec<String> = summary.iter().map(|(k, h)| format!("{k} H={h:.4}")).collect();
    info!("replication {m} done: {}", line.join(", "));
    outcomes
}
