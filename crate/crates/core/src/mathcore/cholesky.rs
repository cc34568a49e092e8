use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// First escalated jitter, relative to the mean diagonal.
pub const JITTER_START_FACTOR: f64 = 1e-10;
/// Largest jitter tried, relative to the mean diagonal.
pub const JITTER_CAP_FACTOR: f64 = 1e-4;

/// Lower Cholesky factor of `A + jitter·I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    inner: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.inner.l_dirty().nrows()
    }

    /// Jitter that was added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.inner.l()
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let l = self.inner.l_dirty();
        let n = b.len();
        let mut z = b.clone();
        for i in 0..n {
            let mut acc = z[i];
            for k in 0..i {
                acc -= l[(i, k)] * z[k];
            }
            z[i] = acc / l[(i, i)];
        }
        z
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.inner.solve(b)
    }

    /// `log det(L Lᵀ)`.
    pub fn log_det(&self) -> f64 {
        let l = self.inner.l_dirty();
        2.0 * (0..self.dim()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    /// `(L Lᵀ)⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.inner.inverse()
    }
}

/// Factorizes `a + jitter·I`, escalating the jitter ×10 on failure (starting
/// no lower than `1e-10·mean(diag)`) until it would exceed `1e-4·mean(diag)`.
pub fn cholesky(a: &DMatrix<f64>, jitter: f64) -> Result<CholeskyFactor> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !(jitter >= 0.0) {
        return Err(Error::Domain(format!("jitter must be nonnegative, got {jitter}")));
    }
    let n = a.nrows();
    let mean_diag = if n == 0 { 0.0 } else { a.diagonal().sum() / n as f64 };
    let cap = JITTER_CAP_FACTOR * mean_diag.max(0.0);

    let mut current = jitter;
    loop {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] += current;
        }
        if let Some(inner) = Cholesky::new(shifted) {
            let l = inner.l_dirty();
            if (0..n).all(|i| l[(i, i)] > 0.0 && l[(i, i)].is_finite()) {
                return Ok(CholeskyFactor { inner, jitter: current });
            }
        }
        let next = (current * 10.0).max(JITTER_START_FACTOR * mean_diag);
        if !(next <= cap) || next <= current {
            return Err(Error::Singular { jitter: current });
        }
        current = next;
    }
}
