use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::kernel::ArdSeKernel;
use crate::error::{Error, Result};
use crate::mathcore::{cholesky, CholeskyFactor};

/// Negative variances from cancellation smaller than this are clamped to zero.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-8;
/// Candidates whose predictive variance is at or below this are degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparameters {
    pub kernel: ArdSeKernel,
    pub noise_variance: f64,
}

impl GpHyperparameters {
    pub fn new(kernel: ArdSeKernel, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Domain(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(Self {
            kernel,
            noise_variance,
        })
    }

    /// Unit signal variance and lengthscales, noise variance 0.1. Used for
    /// decisions with too little data to fit.
    pub fn default_for(dim: usize) -> Self {
        Self {
            kernel: ArdSeKernel::new(1.0, vec![1.0; dim]).expect("valid default kernel"),
            noise_variance: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `[ln s², ln ℓ_1, …, ln ℓ_p, ln σ²]`.
    pub fn to_log(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim() + 2);
        v.push(self.kernel.signal_variance().ln());
        v.extend(self.kernel.lengthscales().iter().map(|l| l.ln()));
        v.push(self.noise_variance.ln());
        v
    }

    pub fn from_log(log: &[f64]) -> Result<Self> {
        if log.len() < 3 {
            return Err(Error::Shape(format!(
                "log-hyperparameter vector needs at least 3 entries, got {}",
                log.len()
            )));
        }
        let p = log.len() - 2;
        let kernel = ArdSeKernel::new(log[0].exp(), log[1..=p].iter().map(|v| v.exp()).collect())?;
        Self::new(kernel, log[p + 1].exp())
    }
}

/// Gaussian posterior `N(mean, variance)` of the latent function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentPosterior {
    pub mean: f64,
    pub variance: f64,
}

/// Latent posterior at the target together with `L⁻¹ k(X, x̃)`, which is all
/// that is needed to condition on a single extra observation.
#[derive(Debug, Clone)]
pub struct TargetState {
    point: Vec<f64>,
    posterior: LatentPosterior,
    whitened: DVector<f64>,
}

impl TargetState {
    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn posterior(&self) -> LatentPosterior {
        self.posterior
    }
}

/// Coupling between a target and one candidate input under a fixed model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateLink {
    /// Posterior `Cov(f(x̃), f(x_j))`.
    pub cross_covariance: f64,
    /// Predictive mean at `x_j`.
    pub predictive_mean: f64,
    /// Predictive variance at `x_j`, noise included.
    pub predictive_variance: f64,
}

impl CandidateLink {
    /// Target posterior after observing `y` at the candidate.
    pub fn condition(&self, target: LatentPosterior, y: f64) -> LatentPosterior {
        let gain = self.cross_covariance / self.predictive_variance;
        LatentPosterior {
            mean: target.mean + gain * (y - self.predictive_mean),
            variance: (target.variance - self.variance_reduction()).max(0.0),
        }
    }

    /// `c² / v_j`, independent of the observed value.
    pub fn variance_reduction(&self) -> f64 {
        self.cross_covariance * self.cross_covariance / self.predictive_variance
    }
}

/// A fitted GP posterior for one decision. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyperparameters,
    /// Training inputs stored one point per column (p × n).
    points: DMatrix<f64>,
    targets: DVector<f64>,
    factor: Option<CholeskyFactor>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Prior-only model.
    pub fn prior(hyper: GpHyperparameters) -> Self {
        let p = hyper.dim();
        Self {
            hyper,
            points: DMatrix::zeros(p, 0),
            targets: DVector::zeros(0),
            factor: None,
            alpha: DVector::zeros(0),
        }
    }

    /// Conditions on `x` (n × p) and `y` with the hyperparameters held fixed.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, hyper: GpHyperparameters) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "{} input rows but {} outputs",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() > 0 && x.ncols() != hyper.dim() {
            return Err(Error::Shape(format!(
                "inputs have {} columns, kernel expects {}",
                x.ncols(),
                hyper.dim()
            )));
        }
        Self::from_points(x.transpose(), y.clone(), hyper)
    }

    pub(crate) fn from_points(
        points: DMatrix<f64>,
        targets: DVector<f64>,
        hyper: GpHyperparameters,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Ok(Self::prior(hyper));
        }
        let gram = gram_matrix(&hyper, &points);
        let factor = cholesky(&gram, 0.0)?;
        let alpha = factor.solve(&targets);
        Ok(Self {
            hyper,
            points,
            targets,
            factor: Some(factor),
            alpha,
        })
    }

    /// Same hyperparameters, one more training row.
    pub fn with_observation(&self, x: &[f64], y: f64) -> Result<Self> {
        self.check_dim(x)?;
        let n = self.len();
        let mut points = self.points.clone().resize_horizontally(n + 1, 0.0);
        points.column_mut(n).copy_from_slice(x);
        let targets = self.targets.clone().push(y);
        Self::from_points(points, targets, self.hyper.clone())
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    pub fn kernel(&self) -> &ArdSeKernel {
        &self.hyper.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.hyper.noise_variance
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    /// Training inputs, n × p.
    pub fn inputs(&self) -> DMatrix<f64> {
        self.points.transpose()
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn factor(&self) -> Option<&CholeskyFactor> {
        self.factor.as_ref()
    }

    /// `[κ(X,X) + σ²I]⁻¹ y`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn point(&self, i: usize) -> &[f64] {
        let p = self.dim();
        &self.points.as_slice()[i * p..(i + 1) * p]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point has dimension {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn cross(&self, x: &[f64]) -> DVector<f64> {
        let k = &self.hyper.kernel;
        DVector::from_iterator(self.len(), (0..self.len()).map(|i| k.eval_unchecked(self.point(i), x)))
    }

    /// Returns `(k(X, x), L⁻¹ k(X, x))`.
    fn cross_and_whitened(&self, x: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let k = self.cross(x);
        let w = match &self.factor {
            Some(f) => f.solve_lower(&k),
            None => DVector::zeros(0),
        };
        (k, w)
    }

    pub fn posterior_at(&self, x: &[f64]) -> Result<LatentPosterior> {
        self.check_dim(x)?;
        let (k, w) = self.cross_and_whitened(x);
        let prior = self.hyper.kernel.signal_variance();
        Ok(LatentPosterior {
            mean: k.dot(&self.alpha),
            variance: clamp_variance(prior - w.norm_squared())?,
        })
    }

    /// Mean and variance of a noisy observation at `x`.
    pub fn predictive_at(&self, x: &[f64]) -> Result<(f64, f64)> {
        let post = self.posterior_at(x)?;
        Ok((post.mean, post.variance + self.hyper.noise_variance))
    }

    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        let factor = self.factor.as_ref().ok_or(Error::UndefinedEvidence)?;
        let n = self.len() as f64;
        Ok(-0.5 * self.targets.dot(&self.alpha) - 0.5 * factor.log_det() - 0.5 * n * (2.0 * PI).ln())
    }

    pub fn target_state(&self, x: &[f64]) -> Result<TargetState> {
        self.check_dim(x)?;
        let (k, whitened) = self.cross_and_whitened(x);
        let prior = self.hyper.kernel.signal_variance();
        let posterior = LatentPosterior {
            mean: k.dot(&self.alpha),
            variance: clamp_variance(prior - whitened.norm_squared())?,
        };
        Ok(TargetState {
            point: x.to_vec(),
            posterior,
            whitened,
        })
    }

    pub fn link(&self, target: &TargetState, x: &[f64]) -> Result<CandidateLink> {
        self.check_dim(x)?;
        let (k, w) = self.cross_and_whitened(x);
        let kern = &self.hyper.kernel;
        let cross_covariance = kern.eval_unchecked(&target.point, x) - target.whitened.dot(&w);
        let latent = clamp_variance(kern.signal_variance() - w.norm_squared())?;
        let predictive_variance = latent + self.hyper.noise_variance;
        if !(predictive_variance > DEGENERATE_VARIANCE) {
            return Err(Error::DegenerateCandidate {
                variance: predictive_variance,
            });
        }
        Ok(CandidateLink {
            cross_covariance,
            predictive_mean: k.dot(&self.alpha),
            predictive_variance,
        })
    }

    /// Target posterior after a hypothetical observation `(x, y)`, without
    /// refactorizing the Gram matrix.
    pub fn fantasy_posterior_at(&self, target: &TargetState, x: &[f64], y: f64) -> Result<LatentPosterior> {
        Ok(self.link(target, x)?.condition(target.posterior, y))
    }
}

pub(crate) fn gram_matrix(hyper: &GpHyperparameters, points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.ncols();
    let p = points.nrows();
    let pts = points.as_slice();
    let k = &hyper.kernel;
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = &pts[i * p..(i + 1) * p];
        gram[(i, i)] = k.signal_variance() + hyper.noise_variance;
        for j in 0..i {
            let v = k.eval_unchecked(xi, &pts[j * p..(j + 1) * p]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    gram
}

fn clamp_variance(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -NEGATIVE_VARIANCE_TOL {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!("posterior variance {v:e} is negative")))
    }
}
