use std::time::{Duration, Instant};

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::dataset::{PotentialOutcomesDataset, Provenance};
use super::split::{split, Split, SplitSpec};
use crate::acquisition::{Candidate, DEigConfig, FantasyScheme, Strategy};
use crate::decision::{bayes_decision, PiEstimator, TargetPosterior};
use crate::error::{Error, Result};
use crate::gp::{
    optimize_hyperparameters, optimize_hyperparameters_from, GpHyperparameters, GpModel, OptimizerSettings,
};
use crate::mathcore::gauss_hermite;
use crate::seed::derive_seed;

const FIT_STREAM: u64 = 1;
const ACQUISITION_STREAM: u64 = 2;
const METRIC_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GpSettings {
    pub optimizer: OptimizerSettings,
    /// Re-optimize hyperparameters after every real acquisition. When off,
    /// a model keeps its hyperparameters and is only conditioned on new rows.
    pub refit_hyperparameters: bool,
    /// Seed each refit with one extra local search from the current optimum.
    pub warm_start: bool,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            refit_hyperparameters: true,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiChoice {
    Quadrature,
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSettings {
    pub n_fantasy: usize,
    pub scheme: FantasyScheme,
    pub pi: PiChoice,
    pub quadrature_order: usize,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self {
            n_fantasy: 20,
            scheme: FantasyScheme::GaussHermite,
            pi: PiChoice::Quadrature,
            quadrature_order: crate::mathcore::DEFAULT_ORDER,
        }
    }
}

impl AcquisitionSettings {
    pub fn estimator(&self, seed: u64) -> Result<PiEstimator> {
        Ok(match self.pi {
            PiChoice::Quadrature => PiEstimator::Quadrature(gauss_hermite(self.quadrature_order)?),
            PiChoice::MonteCarlo { samples } => PiEstimator::MonteCarlo { samples, seed },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricStep {
    pub step: usize,
    /// Whether the Bayes decision at the target equals the ground truth.
    pub correct: bool,
    /// Entropy of the optimal-decision posterior at the target (nats).
    pub entropy: f64,
    /// Dataset row and decision acquired at this step (none at step 0).
    pub selected: Option<(usize, usize)>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    pub steps: Vec<MetricStep>,
    /// The pool ran out before `n_acq` acquisitions.
    pub truncated: bool,
}

/// Per-decision training data.
#[derive(Debug, Clone)]
struct DecisionData {
    rows: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl DecisionData {
    fn matrices(&self, dim: usize) -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(self.rows.len(), dim, |i, j| self.rows[i][j]);
        (x, DVector::from_vec(self.outputs.clone()))
    }
}

/// A split with its models fitted on the initial training set. Strategies
/// only ever see the models, the pool `(x, d)` pairs and the target input;
/// outcomes are revealed one acquired row at a time.
#[derive(Debug, Clone)]
pub struct Replication<'a> {
    ds: &'a PotentialOutcomesDataset,
    split: Split,
    inputs: DMatrix<f64>,
    data: Vec<DecisionData>,
    models: Vec<GpModel>,
    pool: Vec<Candidate>,
    target: Vec<f64>,
    seed: u64,
    gp: GpSettings,
    acq: AcquisitionSettings,
    step_zero: MetricStep,
}

fn standardize(ds: &PotentialOutcomesDataset, train: &[usize]) -> DMatrix<f64> {
    let mut x = ds.x.clone();
    if ds.provenance == Provenance::Synthetic {
        return x;
    }
    let n = train.len() as f64;
    for j in 0..x.ncols() {
        let mean = train.iter().map(|&i| ds.x[(i, j)]).sum::<f64>() / n;
        let var = train.iter().map(|&i| (ds.x[(i, j)] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        x.column_mut(j).apply(|v| *v = (*v - mean) / sd);
    }
    x
}

impl<'a> Replication<'a> {
    pub fn prepare(
        ds: &'a PotentialOutcomesDataset,
        spec: &SplitSpec,
        gp: &GpSettings,
        acq: &AcquisitionSettings,
    ) -> Result<Self> {
        ds.validate()?;
        let split = split(ds, spec)?;
        let inputs = standardize(ds, &split.train);
        let row = |i: usize| -> Vec<f64> { inputs.row(i).iter().copied().collect() };

        let mut data = vec![
            DecisionData {
                rows: Vec::new(),
                outputs: Vec::new()
            };
            ds.n_decisions()
        ];
        for &i in &split.train {
            let d = ds.assigned[i];
            data[d].rows.push(row(i));
            data[d].outputs.push(ds.y_observed(i));
        }
        let pool = split
            .pool
            .iter()
            .map(|&i| Candidate {
                index: i,
                x: row(i),
                decision: ds.assigned[i],
            })
            .collect();
        let target = row(split.target);

        let mut rep = Self {
            ds,
            split,
            inputs,
            data,
            models: Vec::new(),
            pool,
            target,
            seed: spec.seed,
            gp: gp.clone(),
            acq: acq.clone(),
            step_zero: MetricStep {
                step: 0,
                correct: false,
                entropy: 0.0,
                selected: None,
                wall_time: Duration::ZERO,
            },
        };
        let started = Instant::now();
        rep.models = (0..ds.n_decisions())
            .map(|k| rep.fit_initial(k))
            .collect::<Result<_>>()?;
        let (correct, entropy) = rep.metrics(&rep.models, 0)?;
        rep.step_zero = MetricStep {
            step: 0,
            correct,
            entropy,
            selected: None,
            wall_time: started.elapsed(),
        };
        Ok(rep)
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn models(&self) -> &[GpModel] {
        &self.models
    }

    pub fn pool(&self) -> &[Candidate] {
        &self.pool
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Standardized covariates of every row.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn step_zero(&self) -> &MetricStep {
        &self.step_zero
    }

    fn fit_seed(&self, k: usize, step: usize) -> u64 {
        derive_seed(self.seed, &[FIT_STREAM, k as u64, step as u64])
    }

    fn fit_initial(&self, k: usize) -> Result<GpModel> {
        let dim = self.ds.dim();
        let (x, y) = self.data[k].matrices(dim);
        if y.len() >= 2 {
            optimize_hyperparameters(&x, &y, &self.gp.optimizer, self.fit_seed(k, 0))
        } else {
            GpModel::fit(&x, &y, GpHyperparameters::default_for(dim))
        }
    }

    fn refit(&self, previous: &GpModel, data: &DecisionData, k: usize, step: usize) -> Result<GpModel> {
        let (x, y) = data.matrices(self.ds.dim());
        if self.gp.refit_hyperparameters && y.len() >= 2 {
            let warm = (self.gp.warm_start && previous.len() >= 2).then(|| previous.hyperparameters());
            optimize_hyperparameters_from(&x, &y, &self.gp.optimizer, self.fit_seed(k, step), warm)
        } else {
            GpModel::fit(&x, &y, previous.hyperparameters().clone())
        }
    }

    fn metrics(&self, models: &[GpModel], step: usize) -> Result<(bool, f64)> {
        let latents = models
            .iter()
            .map(|m| m.posterior_at(&self.target))
            .collect::<Result<Vec<_>>>()?;
        let t = TargetPosterior::from_latents(&latents)?;
        let estimator = self
            .acq
            .estimator(derive_seed(self.seed, &[METRIC_STREAM, step as u64]))?;
        let entropy = estimator.posterior(&t)?.entropy;
        Ok((bayes_decision(&t) == self.split.best_decision, entropy))
    }

    /// Runs the sequential acquisition loop. Leaves `self` untouched so the
    /// same fitted start can be shared by every strategy.
    pub fn run(&self, strategy: Strategy, n_acq: usize) -> Result<MetricTrace> {
        self.run_with(n_acq, |models, pool, target, cfg| {
            strategy.choose(models, pool, target, cfg)
        })
    }

    /// Same loop with an arbitrary selection rule returning a pool position.
    pub fn run_with<F>(&self, n_acq: usize, mut choose: F) -> Result<MetricTrace>
    where
        F: FnMut(&[GpModel], &[Candidate], &[f64], &DEigConfig) -> Result<usize>,
    {
        let mut models = self.models.clone();
        let mut data = self.data.clone();
        let mut pool = self.pool.clone();
        let mut steps = vec![self.step_zero.clone()];
        let mut truncated = false;
        let estimator = self.acq.estimator(derive_seed(self.seed, &[ACQUISITION_STREAM, 0]))?;

        for step in 1..=n_acq {
            if pool.is_empty() {
                truncated = true;
                break;
            }
            let started = Instant::now();
            let cfg = DEigConfig {
                n_fantasy: self.acq.n_fantasy,
                scheme: self.acq.scheme,
                pi: estimator.clone(),
                seed: derive_seed(self.seed, &[ACQUISITION_STREAM]),
                round: step as u64,
            };
            let pos = choose(&models, &pool, &self.target, &cfg)?;
            if pos >= pool.len() {
                return Err(Error::Shape(format!("selected position {pos} outside pool of {}", pool.len())));
            }
            let cand = pool.remove(pos);
            let y = self.reveal(&cand);
            let k = cand.decision;
            data[k].rows.push(cand.x.clone());
            data[k].outputs.push(y);
            models[k] = self.refit(&models[k], &data[k], k, step)?;
            let (correct, entropy) = self.metrics(&models, step)?;
            debug!(
                "step {step}: row {} decision {} -> H = {entropy:.4}",
                cand.index, k
            );
            steps.push(MetricStep {
                step,
                correct,
                entropy,
                selected: Some((cand.index, k)),
                wall_time: started.elapsed(),
            });
        }
        Ok(MetricTrace { steps, truncated })
    }

    /// Observed outcome of an acquired candidate, under its own decision only.
    fn reveal(&self, cand: &Candidate) -> f64 {
        self.ds.y_obs[(cand.index, cand.decision)]
    }
}

pub fn run_replication(
    ds: &PotentialOutcomesDataset,
    spec: &SplitSpec,
    strategy: Strategy,
    n_acq: usize,
    gp: &GpSettings,
    acq: &AcquisitionSettings,
) -> Result<MetricTrace> {
    Replication::prepare(ds, spec, gp, acq)?.run(strategy, n_acq)
}
