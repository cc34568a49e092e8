//! Gauss-Hermite rules for expectations under a Gaussian.
//!
//! Nodes come from the Golub-Welsch eigenproblem on the Hermite Jacobi
//! matrix. Each node is then polished by Newton steps on the orthonormal
//! Hermite recurrence and the weight is evaluated from
//! `w_i = 2^{n-1} n! √π / (n² H_{n-1}(x_i)²)`, which in orthonormal form is
//! `1 / (n p_{n-1}(x_i)²)`. Eigenvector-based weights lose relative accuracy
//! in the tails, the recurrence does not.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 20;
pub const MAX_ORDER: usize = 100;

/// Nodes `x_i` and weights `ω_i` for `∫ f(x) e^{-x²} dx ≈ Σ ω_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Points and probability weights for a `N(mu, var)` expectation:
    /// `y_i = √2 σ x_i + μ` with weights `ω_i / √π` (summing to one).
    pub fn gaussian_points(&self, mu: f64, var: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let scale = SQRT_2 * var.max(0.0).sqrt();
        let norm = PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (scale * x + mu, w * norm))
    }
}

/// Orthonormal Hermite values `(p_{n-1}(x), p_n(x))`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    for j in 1..=n {
        let jf = j as f64;
        let next = x * (2.0 / jf).sqrt() * cur - ((jf - 1.0) / jf).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::config(
            "quadrature_order",
            format!("must be in 1..={MAX_ORDER}, got {order}"),
        ));
    }
    let n = order;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guesses.sort_by(|a, b| a.total_cmp(b));

    let nf = n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for mut x in guesses {
        for _ in 0..8 {
            let (pm1, pn) = orthonormal_hermite(n, x);
            let deriv = (2.0 * nf).sqrt() * pm1;
            let step = pn / deriv;
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (pm1, _) = orthonormal_hermite(n, x);
        nodes.push(x);
        weights.push(1.0 / (nf * pm1 * pm1));
    }

    // Enforce exact mirror symmetry about zero.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss-Legendre rule on `[-1, 1]` from the eigen-decomposition of its
/// Jacobi matrix.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::config(
            "quadrature_order",
            format!("must be in 1..={MAX_ORDER}, got {order}"),
        ));
    }
    let n = order;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut nodes, mut weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        (nodes[i], nodes[j], weights[i], weights[j]) = (-x, x, w, w);
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `E[f(y)]` for `y ~ N(mu, var)` under the given rule.
pub fn expect_gaussian<F>(f: F, mu: f64, var: f64, rule: &QuadratureRule) -> f64
where
    F: Fn(f64) -> f64,
{
    debug_assert!(var > 0.0, "expect_gaussian needs a positive variance");
    rule.gaussian_points(mu, var).map(|(y, w)| w * f(y)).sum()
}
