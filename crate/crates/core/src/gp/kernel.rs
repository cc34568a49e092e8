use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `k(x, x') = s² exp(-½ Σ_j (x_j - x'_j)² / ℓ_j²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArdSeKernel {
    signal_variance: f64,
    lengthscales: Vec<f64>,
}

impl ArdSeKernel {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(signal_variance > 0.0 && signal_variance.is_finite()) {
            return Err(Error::Domain(format!(
                "signal variance must be positive, got {signal_variance}"
            )));
        }
        if lengthscales.is_empty() {
            return Err(Error::Shape("kernel needs at least one lengthscale".into()));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Domain(format!("lengthscales must be positive, got {l}")));
        }
        Ok(Self {
            signal_variance,
            lengthscales,
        })
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::Shape(format!(
                "kernel has {} lengthscales, got points of length {} and {}",
                self.dim(),
                x.len(),
                y.len()
            )));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Gram matrix `k(X, X)` of the rows of `x` (n × p).
    pub fn gram(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "inputs have {} columns, kernel expects {}",
                x.ncols(),
                self.dim()
            )));
        }
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        let n = rows.len();
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            gram[(i, i)] = self.signal_variance;
            for j in 0..i {
                let v = self.eval_unchecked(&rows[i], &rows[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        Ok(gram)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.signal_variance * (-0.5 * self.scaled_sq_dist(x, y)).exp()
    }

    #[inline]
    pub(crate) fn scaled_sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }
}
