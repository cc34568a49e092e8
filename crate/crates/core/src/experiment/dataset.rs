use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    External,
}

/// Covariates with the outcome of every decision for every individual.
///
/// `y_true` holds noiseless outcomes where known (used only to define the
/// ground-truth best decision), `y_obs` the noisy outcomes that an
/// acquisition would reveal.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomesDataset {
    pub x: DMatrix<f64>,
    pub y_true: DMatrix<f64>,
    pub y_obs: DMatrix<f64>,
    /// Zero-based decision actually assigned to each row.
    pub assigned: Vec<usize>,
    pub provenance: Provenance,
}

impl PotentialOutcomesDataset {
    pub fn new(
        x: DMatrix<f64>,
        y_true: DMatrix<f64>,
        y_obs: DMatrix<f64>,
        assigned: Vec<usize>,
        provenance: Provenance,
    ) -> Result<Self> {
        let ds = Self {
            x,
            y_true,
            y_obs,
            assigned,
            provenance,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.nrows();
        let k = self.y_true.ncols();
        if k < 2 {
            return Err(Error::Shape(format!("need at least 2 decisions, got {k}")));
        }
        if n < k {
            return Err(Error::Shape(format!("need at least as many rows as decisions, got {n} < {k}")));
        }
        if self.x.ncols() == 0 {
            return Err(Error::Shape("dataset has no covariates".into()));
        }
        if self.y_true.nrows() != n || self.y_obs.nrows() != n || self.assigned.len() != n {
            return Err(Error::Shape("row counts of x, y_true, y_obs and d disagree".into()));
        }
        if self.y_obs.ncols() != k {
            return Err(Error::Shape(format!(
                "{} true-outcome columns but {} observed-outcome columns",
                k,
                self.y_obs.ncols()
            )));
        }
        if let Some((i, d)) = self.assigned.iter().enumerate().find(|(_, &d)| d >= k) {
            return Err(Error::Shape(format!("row {i} assigned decision {d} of {k}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_decisions(&self) -> usize {
        self.y_true.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Observed outcome of row `i` under its assigned decision.
    pub fn y_observed(&self, i: usize) -> f64 {
        self.y_obs[(i, self.assigned[i])]
    }

    /// Best decision for row `i` by its noiseless outcomes, lowest index on ties.
    pub fn best_decision(&self, i: usize) -> usize {
        let row = self.y_true.row(i);
        let mut best = 0;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        best
    }
}
