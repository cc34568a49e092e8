use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, weighted::WeightedIndex};

use super::dataset::{PotentialOutcomesDataset, Provenance};
use crate::error::{Error, Result};
use crate::gp::ArdSeKernel;
use crate::mathcore::cholesky;
use crate::seed::rng_from;

/// Fully synthetic potential-outcomes data: standard-normal covariates and one
/// GP draw per decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_points: usize,
    pub dim: usize,
    pub n_decisions: usize,
    pub assignment_weights: Vec<f64>,
    /// Kernel signal variance per decision.
    pub signal_variances: Vec<f64>,
    /// Lengthscales are drawn log-uniformly in this range, per dimension and decision.
    pub lengthscale_range: (f64, f64),
    /// Noise variance of decision `k` is `noise_fraction · signal_variances[k]`.
    pub noise_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_points: 400,
            dim: 5,
            n_decisions: 4,
            assignment_weights: vec![0.4, 0.3, 0.2, 0.1],
            signal_variances: vec![0.5, 1.0, 1.5, 2.0],
            lengthscale_range: (0.5, 2.0),
            noise_fraction: 0.1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.n_decisions;
        if k < 2 {
            return Err(Error::config("synthetic.n_decisions", "must be at least 2"));
        }
        if self.dim == 0 {
            return Err(Error::config("synthetic.dim", "must be at least 1"));
        }
        if self.n_points < k {
            return Err(Error::config("synthetic.n_points", "must be at least n_decisions"));
        }
        if self.assignment_weights.len() != k {
            return Err(Error::config(
                "synthetic.assignment_weights",
                format!("needs {k} entries, got {}", self.assignment_weights.len()),
            ));
        }
        if self.assignment_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::config("synthetic.assignment_weights", "entries must be positive"));
        }
        let total: f64 = self.assignment_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("synthetic.assignment_weights", format!("must sum to 1, got {total}")));
        }
        if self.signal_variances.len() != k || self.signal_variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config(
                "synthetic.signal_variances",
                format!("needs {k} positive entries"),
            ));
        }
        let (lo, hi) = self.lengthscale_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config("synthetic.lengthscale_range", "need 0 < lo <= hi"));
        }
        if !(self.noise_fraction > 0.0 && self.noise_fraction.is_finite()) {
            return Err(Error::config("synthetic.noise_fraction", "must be positive"));
        }
        Ok(())
    }

    pub fn noise_variance(&self, k: usize) -> f64 {
        self.noise_fraction * self.signal_variances[k]
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<PotentialOutcomesDataset> {
    cfg.validate()?;
    let (n, p, k) = (cfg.n_points, cfg.dim, cfg.n_decisions);

    let mut rng = rng_from(seed, &[0]);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));

    let mut y_true = DMatrix::zeros(n, k);
    let mut y_obs = DMatrix::zeros(n, k);
    let (ll, lh) = (cfg.lengthscale_range.0.ln(), cfg.lengthscale_range.1.ln());
    for d in 0..k {
        let mut rng = rng_from(seed, &[1, d as u64]);
        let lengthscales = (0..p)
            .map(|_| if lh > ll { rng.random_range(ll..lh).exp() } else { ll.exp() })
            .collect();
        let kernel = ArdSeKernel::new(cfg.signal_variances[d], lengthscales)?;
        // Noiseless Gram; the jitter ladder absorbs its near-singularity.
        let gram = kernel.gram(&x)?;
        let l = cholesky(&gram, 0.0)?.l();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let f = l * z;
        let noise_sd = cfg.noise_variance(d).sqrt();
        for i in 0..n {
            y_true[(i, d)] = f[i];
            let e: f64 = StandardNormal.sample(&mut rng);
            y_obs[(i, d)] = f[i] + noise_sd * e;
        }
    }

    let mut rng = rng_from(seed, &[2]);
    let weights = WeightedIndex::new(&cfg.assignment_weights)
        .map_err(|e| Error::config("synthetic.assignment_weights", e.to_string()))?;
    let assigned = (0..n).map(|_| weights.sample(&mut rng)).collect();

    PotentialOutcomesDataset::new(x, y_true, y_obs, assigned, Provenance::Synthetic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let cfg = SyntheticConfig::default();
        cfg.validate().unwrap();
        let ds = generate_synthetic(&cfg, 11).unwrap();
        assert_eq!((ds.x.nrows(), ds.x.ncols()), (400, 5));
        assert_eq!((ds.y_true.nrows(), ds.y_true.ncols()), (400, 4));
        assert_eq!(ds.assigned.len(), 400);
        assert_eq!(ds.provenance, Provenance::Synthetic);
    }

    #[test]
    fn assignment_frequencies_follow_weights() {
        let cfg = SyntheticConfig::default();
        let ds = generate_synthetic(&cfg, 3).unwrap();
        for (d, w) in cfg.assignment_weights.iter().enumerate() {
            let freq = ds.assigned.iter().filter(|&&a| a == d).count() as f64 / 400.0;
            assert!((freq - w).abs() <= 3.0 / 400f64.sqrt(), "decision {d}: {freq} vs {w}");
        }
    }

    #[test]
    fn latent_columns_have_roughly_kernel_variance() {
        let cfg = SyntheticConfig::default();
        // average over a few seeds: one draw of a long-lengthscale GP is strongly correlated
        let seeds = 0..6u64;
        let mut avg = vec![0.0; 4];
        for s in seeds.clone() {
            let ds = generate_synthetic(&cfg, s).unwrap();
            for d in 0..4 {
                let col = ds.y_true.column(d);
                let m = col.mean();
                avg[d] += col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 399.0;
            }
        }
        for d in 0..4 {
            let v = avg[d] / seeds.clone().count() as f64;
            let sv = cfg.signal_variances[d];
            assert!((v - sv).abs() <= 0.25 * sv, "decision {d}: {v} vs {sv}");
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let cfg = SyntheticConfig { n_points: 30, ..Default::default() };
        assert_eq!(generate_synthetic(&cfg, 5).unwrap(), generate_synthetic(&cfg, 5).unwrap());
        let bad = SyntheticConfig { assignment_weights: vec![0.5, 0.5, 0.1, -0.1], ..Default::default() };
        assert!(matches!(generate_synthetic(&bad, 0), Err(Error::Config { .. })));
    }
}
