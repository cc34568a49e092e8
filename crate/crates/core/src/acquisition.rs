//! Acquisition strategies over a pool of `(x, d)` candidates.
//!
//! `d-eig` scores each candidate by the expected entropy of the
//! optimal-decision posterior at the target after observing that candidate
//! (lower is better). The baselines are random sampling, uncertainty
//! sampling (`eig`), decision-uncertainty sampling (`d-us`) and targeted
//! information gain on the target's predictive distribution (`t-eig`).

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decision::{PiEstimator, TargetPosterior};
use crate::error::{Error, Result};
use crate::gp::{GpModel, TargetState};
use crate::mathcore::{gauss_hermite, QuadratureRule};
use crate::seed::{derive_seed, rng_from};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Stable identifier of the candidate (its dataset row).
    pub index: usize,
    pub x: Vec<f64>,
    pub decision: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    Maximize,
    Minimize,
}

/// One score per pool entry, in pool order.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionScores {
    pub semantics: Semantics,
    pub scores: Vec<f64>,
}

impl AcquisitionScores {
    /// Position of the best finite score, lowest position on ties.
    pub fn select(&self) -> Result<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            if !s.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => match self.semantics {
                    Semantics::Maximize => s > self.scores[b],
                    Semantics::Minimize => s < self.scores[b],
                },
            };
            if better {
                best = Some(i);
            }
        }
        best.ok_or(Error::NoValidCandidate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FantasyScheme {
    MonteCarlo,
    GaussHermite,
}

impl FromStr for FantasyScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(FantasyScheme::MonteCarlo),
            "gauss-hermite" => Ok(FantasyScheme::GaussHermite),
            other => Err(Error::config(
                "acquisition.scheme",
                format!("expected `mc` or `gauss-hermite`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for FantasyScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FantasyScheme::MonteCarlo => "mc",
            FantasyScheme::GaussHermite => "gauss-hermite",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DEigConfig {
    pub n_fantasy: usize,
    pub scheme: FantasyScheme,
    pub pi: PiEstimator,
    pub seed: u64,
    /// Acquisition round, mixed into the per-candidate seeds.
    pub round: u64,
}

/// Fantasy outcomes for one candidate as standardized offsets and weights:
/// `y = μ_j + √v_j · z`.
enum Fantasies {
    Quadrature(QuadratureRule),
    Sampled(usize),
}

impl DEigConfig {
    fn fantasies(&self) -> Result<Fantasies> {
        if self.n_fantasy == 0 {
            return Err(Error::config("acquisition.n_fantasy", "must be at least 1"));
        }
        Ok(match self.scheme {
            FantasyScheme::GaussHermite => Fantasies::Quadrature(gauss_hermite(self.n_fantasy)?),
            FantasyScheme::MonteCarlo => Fantasies::Sampled(self.n_fantasy),
        })
    }

    fn candidate_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, &[self.round, index as u64])
    }
}

fn check_pool(models: &[GpModel], pool: &[Candidate]) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::NoValidCandidate);
    }
    if let Some(c) = pool.iter().find(|c| c.decision >= models.len()) {
        return Err(Error::Shape(format!(
            "candidate {} has decision {} but only {} models exist",
            c.index,
            c.decision,
            models.len()
        )));
    }
    Ok(())
}

fn target_states(models: &[GpModel], target: &[f64]) -> Result<Vec<TargetState>> {
    models.iter().map(|m| m.target_state(target)).collect()
}

/// Expected posterior entropy of the optimal decision at `target` after
/// observing each candidate. Degenerate candidates score `+∞`.
pub fn score_deig(
    models: &[GpModel],
    pool: &[Candidate],
    target: &[f64],
    cfg: &DEigConfig,
) -> Result<AcquisitionScores> {
    if models.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 decisions, got {}", models.len())));
    }
    check_pool(models, pool)?;
    let fantasies = cfg.fantasies()?;
    let states = target_states(models, target)?;
    let latents: Vec<_> = states.iter().map(|s| s.posterior()).collect();
    let base = TargetPosterior::from_latents(&latents)?;

    let scores = pool
        .par_iter()
        .map(|cand| {
            let d = cand.decision;
            let link = match models[d].link(&states[d], &cand.x) {
                Ok(link) => link,
                Err(Error::DegenerateCandidate { variance }) => {
                    warn!("candidate {} skipped: predictive variance {variance:e}", cand.index);
                    return Ok(f64::INFINITY);
                }
                Err(e) => return Err(e),
            };
            let seed = cfg.candidate_seed(cand.index);
            let sd = link.predictive_variance.sqrt();
            let mut updated = base.clone();
            let mut entropy_at = |l: usize, z: f64| -> Result<f64> {
                let y = link.predictive_mean + sd * z;
                updated.set_latent(d, link.condition(states[d].posterior(), y));
                let estimator = cfg.pi.reseeded(derive_seed(seed, &[1, l as u64]));
                Ok(estimator.posterior(&updated)?.entropy)
            };
            let mut expected = 0.0;
            match &fantasies {
                Fantasies::Quadrature(rule) => {
                    for (l, (z, w)) in rule.gaussian_points(0.0, 1.0).enumerate() {
                        expected += w * entropy_at(l, z)?;
                    }
                }
                Fantasies::Sampled(n) => {
                    let mut rng = rng_from(seed, &[0]);
                    // antithetic pairs (z, -z); an odd count ends with one plain draw
                    let mut z = 0.0;
                    for l in 0..*n {
                        z = if l % 2 == 0 { rng.sample(StandardNormal) } else { -z };
                        expected += entropy_at(l, z)?;
                    }
                    expected /= *n as f64;
                }
            }
            Ok(expected)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AcquisitionScores {
        semantics: Semantics::Minimize,
        scores,
    })
}

/// Expected information gain on the optimal decision, `H_now - score`, from
/// expected posterior entropies returned by [`score_deig`].
pub fn deig_gains(expected_entropies: &AcquisitionScores, current_entropy: f64) -> AcquisitionScores {
    AcquisitionScores {
        semantics: Semantics::Maximize,
        scores: expected_entropies.scores.iter().map(|s| current_entropy - s).collect(),
    }
}

/// Information gain of each candidate on its own GP,
/// `½ (log(σ²_x + σ²) - log σ²)`; a monotone transform of the predictive
/// variance for a fixed noise level.
pub fn score_eig_us(models: &[GpModel], pool: &[Candidate]) -> Result<AcquisitionScores> {
    check_pool(models, pool)?;
    let scores = pool
        .iter()
        .map(|c| {
            let m = &models[c.decision];
            let latent = m.posterior_at(&c.x)?.variance;
            Ok(eig_from_variances(latent, m.noise_variance()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AcquisitionScores {
        semantics: Semantics::Maximize,
        scores,
    })
}

pub fn eig_from_variances(latent_variance: f64, noise_variance: f64) -> f64 {
    0.5 * ((latent_variance + noise_variance).ln() - noise_variance.ln())
}

/// Uniform draw from the pool; returns a position.
pub fn score_random(pool: &[Candidate], seed: u64) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::NoValidCandidate);
    }
    Ok(rng_from(seed, &[]).random_range(0..pool.len()))
}

/// Entropy of the optimal-decision posterior at each candidate's own input.
pub fn score_dus(models: &[GpModel], pool: &[Candidate], pi: &PiEstimator, seed: u64) -> Result<AcquisitionScores> {
    check_pool(models, pool)?;
    let scores = pool
        .par_iter()
        .map(|c| {
            let latents = models
                .iter()
                .map(|m| m.posterior_at(&c.x))
                .collect::<Result<Vec<_>>>()?;
            let t = TargetPosterior::from_latents(&latents)?;
            Ok(pi.reseeded(derive_seed(seed, &[c.index as u64])).posterior(&t)?.entropy)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AcquisitionScores {
        semantics: Semantics::Maximize,
        scores,
    })
}

/// Reduction in differential entropy of the predictive distribution at the
/// target under the candidate's model:
/// `½ log(σ² + σ²_x̃) - ½ log(σ² + σ²_x̃ - c²/v_j)`.
pub fn score_teig(models: &[GpModel], pool: &[Candidate], target: &[f64]) -> Result<AcquisitionScores> {
    check_pool(models, pool)?;
    let states = target_states(models, target)?;
    let scores = pool
        .iter()
        .map(|c| {
            let m = &models[c.decision];
            let state = &states[c.decision];
            let link = match m.link(state, &c.x) {
                Ok(link) => link,
                Err(Error::DegenerateCandidate { .. }) => return Ok(0.0),
                Err(e) => return Err(e),
            };
            let noise = m.noise_variance();
            let before = state.posterior().variance + noise;
            let after = (state.posterior().variance - link.variance_reduction()).max(0.0) + noise;
            Ok(0.5 * (before.ln() - after.ln()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AcquisitionScores {
        semantics: Semantics::Maximize,
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    DEig,
    Eig,
    Random,
    DUs,
    TEig,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::DEig,
        Strategy::Random,
        Strategy::Eig,
        Strategy::DUs,
        Strategy::TEig,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::DEig => "d-eig",
            Strategy::Eig => "eig",
            Strategy::Random => "random",
            Strategy::DUs => "d-us",
            Strategy::TEig => "t-eig",
        }
    }

    /// Picks a pool position. `cfg.seed` and `cfg.round` also drive the
    /// random and Monte Carlo paths of the baselines.
    pub fn choose(self, models: &[GpModel], pool: &[Candidate], target: &[f64], cfg: &DEigConfig) -> Result<usize> {
        let seed = derive_seed(cfg.seed, &[cfg.round]);
        match self {
            Strategy::DEig => score_deig(models, pool, target, cfg)?.select(),
            Strategy::Eig => score_eig_us(models, pool)?.select(),
            Strategy::Random => score_random(pool, seed),
            Strategy::DUs => score_dus(models, pool, &cfg.pi, seed)?.select(),
            Strategy::TEig => score_teig(models, pool, target)?.select(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "strategies",
                    format!("unknown strategy `{s}` (expected d-eig, eig, random, d-us or t-eig)"),
                )
            })
    }
}
