//! Posterior over which decision is optimal at the target point.
//!
//! Decisions are indexed from zero inside the library; the CSV formats use
//! one-based labels.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::LatentPosterior;
use crate::mathcore::{discrete_entropy, gauss_legendre, normal_cdf, normal_pdf, QuadratureRule};
use crate::seed::rng_from;

/// Variances are floored at this value before quadrature.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Latent posteriors `N(μ_k, σ²_k)` of every decision at the target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPosterior {
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl TargetPosterior {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::Shape(format!(
                "{} means but {} variances",
                means.len(),
                variances.len()
            )));
        }
        if means.len() < 2 {
            return Err(Error::Domain(format!("need at least 2 decisions, got {}", means.len())));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain("posterior means must be finite".into()));
        }
        if variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("posterior variances must be finite and nonnegative".into()));
        }
        Ok(Self { means, variances })
    }

    pub fn from_latents(latents: &[LatentPosterior]) -> Result<Self> {
        Self::new(
            latents.iter().map(|l| l.mean).collect(),
            latents.iter().map(|l| l.variance).collect(),
        )
    }

    pub fn n_decisions(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn latent(&self, k: usize) -> LatentPosterior {
        LatentPosterior {
            mean: self.means[k],
            variance: self.variances[k],
        }
    }

    /// Copy with decision `k`'s posterior replaced.
    pub fn with_latent(&self, k: usize, latent: LatentPosterior) -> Self {
        let mut out = self.clone();
        out.set_latent(k, latent);
        out
    }

    pub fn set_latent(&mut self, k: usize, latent: LatentPosterior) {
        self.means[k] = latent.mean;
        self.variances[k] = latent.variance.max(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiMethod {
    Quadrature { order: usize },
    MonteCarlo { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPosterior {
    pub pi: Vec<f64>,
    /// Entropy of `pi` in nats.
    pub entropy: f64,
    pub method: PiMethod,
}

impl DecisionPosterior {
    fn from_pi(pi: Vec<f64>, method: PiMethod) -> Result<Self> {
        let entropy = discrete_entropy(&pi)?;
        Ok(Self { pi, entropy, method })
    }

    /// Most probable decision, lowest index on ties.
    pub fn mode(&self) -> usize {
        argmax_lowest(&self.pi)
    }
}

/// How `π` is computed wherever an entropy of the optimal decision is needed.
#[derive(Debug, Clone, PartialEq)]
pub enum PiEstimator {
    Quadrature(QuadratureRule),
    MonteCarlo { samples: usize, seed: u64 },
}

impl PiEstimator {
    /// Same estimator with a different Monte Carlo seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        match self {
            PiEstimator::Quadrature(rule) => PiEstimator::Quadrature(rule.clone()),
            PiEstimator::MonteCarlo { samples, .. } => PiEstimator::MonteCarlo {
                samples: *samples,
                seed,
            },
        }
    }

    pub fn posterior(&self, t: &TargetPosterior) -> Result<DecisionPosterior> {
        match self {
            PiEstimator::Quadrature(rule) => compute_pi_quadrature(t, rule),
            PiEstimator::MonteCarlo { samples, seed } => estimate_pi_mc(t, *samples, *seed),
        }
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Bayes-optimal decision under identity utility: the largest posterior
/// mean, lowest index on ties.
pub fn bayes_decision(t: &TargetPosterior) -> usize {
    argmax_lowest(&t.means)
}

/// Fraction of joint draws `f_k ~ N(μ_k, σ²_k)` in which each decision
/// attains the maximum.
pub fn estimate_pi_mc(t: &TargetPosterior, n_samples: usize, seed: u64) -> Result<DecisionPosterior> {
    if n_samples == 0 {
        return Err(Error::config("pi_mc_samples", "must be at least 1"));
    }
    let k = t.n_decisions();
    let sds: Vec<f64> = t.variances.iter().map(|v| v.sqrt()).collect();
    let mut rng = rng_from(seed, &[]);
    let mut wins = vec![0u64; k];
    for _ in 0..n_samples {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for j in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            let f = t.means[j] + sds[j] * z;
            if f > best_val {
                best_val = f;
                best = j;
            }
        }
        wins[best] += 1;
    }
    let n = n_samples as f64;
    DecisionPosterior::from_pi(
        wins.into_iter().map(|w| w as f64 / n).collect(),
        PiMethod::MonteCarlo { samples: n_samples },
    )
}

/// `π_k = E_{f ~ N(μ_k, σ²_k)} [Π_{k'≠k} Φ((f - μ_k') / σ_k')]`, renormalized
/// to sum to one.
///
/// Each expectation uses the Gauss-Hermite rule while the integrand is
/// smooth on the scale of `σ_k`. Once some `σ_k'` is much narrower than
/// `σ_k` the factor `Φ` becomes a near step, which Gauss-Hermite resolves
/// poorly (errors of several percent at a width ratio of 6). Those
/// integrals switch to composite Gauss-Legendre with panel breaks placed
/// around every step.
pub fn compute_pi_quadrature(t: &TargetPosterior, rule: &QuadratureRule) -> Result<DecisionPosterior> {
    let mut pi = vec![0.0; t.n_decisions()];
    pi_quadrature_into(t, rule, &mut pi);
    DecisionPosterior::from_pi(pi, PiMethod::Quadrature { order: rule.order() })
}

/// Largest `σ_k / σ_k'` for which plain Gauss-Hermite is used. At order 20
/// the error on `E[Φ(a z + b)]` is about 2e-7 here.
pub const SMOOTH_WIDTH_RATIO: f64 = 1.5;

// Standardized integration range; φ(9) is about 1e-18.
const Z_MAX: f64 = 9.0;
const PANEL_ORDER: usize = 10;
const STEP_OFFSETS: [f64; 11] = [-8.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0];

fn panel_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER).expect("valid order"))
}

fn product_of_cdfs(f: f64, i: usize, means: &[f64], sds: &[f64]) -> f64 {
    let mut prod = 1.0;
    for j in (0..means.len()).filter(|&j| j != i) {
        prod *= normal_cdf((f - means[j]) / sds[j]);
    }
    prod
}

fn composite_pi(i: usize, means: &[f64], sds: &[f64], breaks: &mut Vec<f64>) -> f64 {
    breaks.clear();
    breaks.extend((-(Z_MAX as i32)..=Z_MAX as i32).map(f64::from));
    for j in (0..means.len()).filter(|&j| j != i) {
        let center = (means[j] - means[i]) / sds[i];
        let width = sds[j] / sds[i];
        for m in STEP_OFFSETS {
            let b = center + m * width;
            if b > -Z_MAX && b < Z_MAX {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let rule = panel_rule();
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in rule.nodes().iter().zip(rule.weights()) {
            let z = mid + half * x;
            total += half * w * normal_pdf(z) * product_of_cdfs(means[i] + sds[i] * z, i, means, sds);
        }
    }
    total
}

pub(crate) fn pi_quadrature_into(t: &TargetPosterior, rule: &QuadratureRule, pi: &mut [f64]) {
    let sds: Vec<f64> = t.variances.iter().map(|v| v.max(VARIANCE_FLOOR).sqrt()).collect();
    let min_sd = sds.iter().copied().fold(f64::INFINITY, f64::min);
    let mut breaks = Vec::new();
    for (i, slot) in pi.iter_mut().enumerate() {
        *slot = if sds[i] <= SMOOTH_WIDTH_RATIO * min_sd {
            rule.gaussian_points(t.means[i], sds[i] * sds[i])
                .map(|(f, w)| w * product_of_cdfs(f, i, &t.means, &sds))
                .sum()
        } else {
            composite_pi(i, &t.means, &sds, &mut breaks)
        };
    }
    let total: f64 = pi.iter().sum();
    if total > 0.0 && total.is_finite() {
        pi.iter_mut().for_each(|p| *p /= total);
    } else {
        // Every integral underflowed; fall back to the mean ordering.
        pi.iter_mut().for_each(|p| *p = 0.0);
        pi[bayes_decision(t)] = 1.0;
    }
}

/// Entropy (nats) of the optimal-decision posterior.
pub fn decision_entropy(t: &TargetPosterior, estimator: &PiEstimator) -> Result<f64> {
    Ok(estimator.posterior(t)?.entropy)
}
