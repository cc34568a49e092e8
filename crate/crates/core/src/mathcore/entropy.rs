use std::f64::consts::{E, PI, SQRT_2};

use libm::erfc;

use crate::error::{Error, Result};

/// Allowed deviation of `Σ p_k` from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Shannon entropy `-Σ p log p` of a probability vector, with `0 log 0 = 0`.
pub fn discrete_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty probability vector".into()));
    }
    let mut total = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        if !(pk >= 0.0) || !pk.is_finite() {
            return Err(Error::InvalidDistribution(format!("entry {k} is {pk}")));
        }
        total += pk;
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
    }
    let h: f64 = p
        .iter()
        .filter(|&&pk| pk > 0.0)
        .map(|&pk| -pk * pk.ln())
        .sum();
    // Rounding can leave the sum a hair outside [0, log K].
    Ok(h.clamp(0.0, (p.len() as f64).ln()))
}

/// Differential entropy of a Gaussian with the given variance, `½ log(2πeσ²)`.
pub fn gaussian_entropy(variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!(
            "gaussian entropy needs a positive variance, got {variance}"
        )));
    }
    Ok(0.5 * (2.0 * PI * E * variance).ln())
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}
