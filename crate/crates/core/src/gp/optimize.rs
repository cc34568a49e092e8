//! Type-II maximum likelihood for the kernel and noise hyperparameters.
//!
//! Each log-hyperparameter `u` is mapped to an unconstrained coordinate `z`
//! through `u = lo + (hi - lo)·sigmoid(z)`, so L-BFGS runs without bounds
//! while the hyperparameters stay inside `[lo, hi]`.

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::model::{gram_matrix, GpHyperparameters, GpModel};
use crate::error::{Error, Result};
use crate::mathcore::cholesky;
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub restarts: usize,
    /// Box applied to every hyperparameter (natural scale).
    pub bounds: (f64, f64),
    /// Range for the log-uniform initial points.
    pub init_range: (f64, f64),
    pub max_iters: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            restarts: 5,
            bounds: (1e-4, 1e4),
            init_range: (1e-2, 1e2),
            max_iters: 200,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::config("gp.restarts", "must be at least 1"));
        }
        let (lo, hi) = self.bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::config("gp.bounds", format!("need 0 < lo < hi, got ({lo}, {hi})")));
        }
        let (a, b) = self.init_range;
        if !(a >= lo && b <= hi && b > a) {
            return Err(Error::config(
                "gp.init_range",
                format!("must lie inside the bounds, got ({a}, {b})"),
            ));
        }
        Ok(())
    }
}

/// Log marginal likelihood and its gradient with respect to the
/// log-hyperparameters `[ln s², ln ℓ…, ln σ²]`.
pub(crate) fn lml_with_gradient(
    hyper: &GpHyperparameters,
    points: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(f64, Vec<f64>)> {
    let n = y.len();
    let p = points.nrows();
    let gram = gram_matrix(hyper, points);
    let factor = cholesky(&gram, 0.0)?;
    let alpha = factor.solve(y);
    let lml = -0.5 * y.dot(&alpha) - 0.5 * factor.log_det() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = ααᵀ - K⁻¹
    let mut w = factor.inverse();
    w.neg_mut();
    w.ger(1.0, &alpha, &alpha, 1.0);

    let noise = hyper.noise_variance;
    let ls = hyper.kernel.lengthscales();
    let pts = points.as_slice();
    let mut grad = vec![0.0; p + 2];
    for a in 0..n {
        let xa = &pts[a * p..(a + 1) * p];
        grad[0] += 0.5 * w[(a, a)] * hyper.kernel.signal_variance();
        grad[p + 1] += 0.5 * w[(a, a)] * noise;
        for b in 0..a {
            let xb = &pts[b * p..(b + 1) * p];
            let kab = hyper.kernel.eval_unchecked(xa, xb);
            // symmetric pair counted twice
            let wk = w[(a, b)] * kab;
            grad[0] += wk;
            for j in 0..p {
                let d = (xa[j] - xb[j]) / ls[j];
                grad[1 + j] += wk * d * d;
            }
        }
    }
    Ok((lml, grad))
}

#[derive(Clone, Copy)]
struct Objective<'a> {
    points: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    lo: f64,
    hi: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Objective<'_> {
    fn to_log(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&zi| self.lo + (self.hi - self.lo) * sigmoid(zi)).collect()
    }

    fn to_unconstrained(&self, log: &[f64]) -> Vec<f64> {
        log.iter()
            .map(|&u| {
                let s = ((u - self.lo) / (self.hi - self.lo)).clamp(1e-12, 1.0 - 1e-12);
                (s / (1.0 - s)).ln()
            })
            .collect()
    }

    fn eval(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let hyper = GpHyperparameters::from_log(&self.to_log(z))?;
        let (lml, grad_u) = lml_with_gradient(&hyper, self.points, self.y)?;
        let grad_z = z
            .iter()
            .zip(&grad_u)
            .map(|(&zi, &g)| {
                let s = sigmoid(zi);
                -g * (self.hi - self.lo) * s * (1.0 - s)
            })
            .collect();
        Ok((-lml, grad_z))
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let (c, _) = self.eval(z)?;
        if !c.is_finite() {
            return Err(argmin::core::Error::msg("non-finite objective"));
        }
        Ok(c)
    }
}

impl Gradient for Objective<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, z: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.eval(z)?.1)
    }
}

/// Multi-start maximization of the log marginal likelihood; returns the
/// model at the best hyperparameters found. Deterministic in `seed`.
pub fn optimize_hyperparameters(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<GpModel> {
    optimize_hyperparameters_from(x, y, settings, seed, None)
}

/// As [`optimize_hyperparameters`], with one extra local search started at
/// `warm` (clipped into the bounds) on top of the random restarts.
pub fn optimize_hyperparameters_from(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    settings: &OptimizerSettings,
    seed: u64,
    warm: Option<&GpHyperparameters>,
) -> Result<GpModel> {
    settings.validate()?;
    if y.len() < 2 {
        return Err(Error::Domain(format!(
            "hyperparameter fitting needs at least 2 observations, got {}",
            y.len()
        )));
    }
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} input rows but {} outputs", x.nrows(), y.len())));
    }
    let p = x.ncols();
    let points = x.transpose();
    let objective = Objective {
        points: &points,
        y,
        lo: settings.bounds.0.ln(),
        hi: settings.bounds.1.ln(),
    };
    let (init_lo, init_hi) = (settings.init_range.0.ln(), settings.init_range.1.ln());

    let mut rng = rng_from(seed, &[]);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let margin = 1e-6 * (objective.hi - objective.lo);
    let warm_log = warm
        .filter(|h| h.dim() == p)
        .map(|h| h.to_log().iter().map(|v| v.clamp(objective.lo + margin, objective.hi - margin)).collect::<Vec<_>>());
    for restart in 0..settings.restarts + usize::from(warm_log.is_some()) {
        let start_log: Vec<f64> = match &warm_log {
            Some(w) if restart == settings.restarts => w.clone(),
            _ => (0..p + 2).map(|_| rng.random_range(init_lo..init_hi)).collect(),
        };
        let start = objective.to_unconstrained(&start_log);

        let mut candidates = Vec::with_capacity(2);
        if let Ok(c) = objective.cost(&start) {
            candidates.push((c, start.clone()));
        }
        match run_lbfgs(&objective, start, settings.max_iters) {
            Ok(found) => candidates.push(found),
            Err(e) => debug!("restart {restart}: local search failed: {e}"),
        }
        for (cost, z) in candidates {
            if cost.is_finite() && best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, z));
            }
        }
    }

    let (_, z) = best.ok_or(Error::OptimizationFailure {
        restarts: settings.restarts,
    })?;
    let hyper = GpHyperparameters::from_log(&objective.to_log(&z))?;
    GpModel::from_points(points, y.clone(), hyper)
}

fn run_lbfgs(
    objective: &Objective<'_>,
    start: Vec<f64>,
    max_iters: u64,
) -> std::result::Result<(f64, Vec<f64>), argmin::core::Error> {
    let linesearch = MoreThuenteLineSearch::new();
    let solver = LBFGS::new(linesearch, 7)
        .with_tolerance_grad(1e-7)?
        .with_tolerance_cost(1e-12)?;
    let res = Executor::new(*objective, solver)
        .configure(|state| state.param(start).max_iters(max_iters))
        .run()?;
    let state = res.state();
    let param = state
        .best_param
        .clone()
        .ok_or_else(|| argmin::core::Error::msg("no parameter returned"))?;
    Ok((state.best_cost, param))
}
