#![allow(dead_code)]

use deig::decision::{compute_pi_quadrature, TargetPosterior};
use deig::gp::{ArdSeKernel, GpHyperparameters, GpModel, LatentPosterior};
use deig::mathcore::{gauss_hermite, DEFAULT_ORDER};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

pub fn random_point(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_hyper(rng: &mut ChaCha8Rng, p: usize) -> GpHyperparameters {
    let kernel = ArdSeKernel::new(
        log_uniform(rng, 0.3, 3.0),
        (0..p).map(|_| log_uniform(rng, 0.3, 3.0)).collect(),
    )
    .unwrap();
    GpHyperparameters::new(kernel, log_uniform(rng, 1e-2, 1.0)).unwrap()
}

/// Random data set drawn from a smooth function plus noise.
pub fn random_data(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
    let phase: f64 = rng.random_range(0.0..3.0);
    let y = DVector::from_fn(n, |i, _| {
        let s: f64 = x.row(i).iter().sum();
        (s + phase).sin() + 0.1 * rng.random_range(-1.0..1.0)
    });
    (x, y)
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize, p: usize) -> GpModel {
    let (x, y) = random_data(rng, n, p);
    GpModel::fit(&x, &y, random_hyper(rng, p)).unwrap()
}

/// Latent posterior at `x` by explicit LU inversion of the Gram matrix.
pub fn dense_posterior(model: &GpModel, x: &[f64]) -> LatentPosterior {
    let k = model.kernel();
    let sv = k.signal_variance();
    let n = model.len();
    if n == 0 {
        return LatentPosterior { mean: 0.0, variance: sv };
    }
    let inputs = model.inputs();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| inputs.row(i).iter().copied().collect()).collect();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        k.eval(&rows[i], &rows[j]).unwrap() + if i == j { model.noise_variance() } else { 0.0 }
    });
    let inv = gram.lu().try_inverse().unwrap();
    let kx = DVector::from_fn(n, |i, _| k.eval(&rows[i], x).unwrap());
    let mean = (kx.transpose() * &inv * model.outputs())[0];
    let variance = sv - (kx.transpose() * &inv * &kx)[0];
    LatentPosterior { mean, variance }
}

/// Model refit from scratch with one extra observation, same hyperparameters.
pub fn refit_with(model: &GpModel, x: &[f64], y: f64) -> GpModel {
    let n = model.len();
    let p = model.dim();
    let inputs = model.inputs();
    let xs = DMatrix::from_fn(n + 1, p, |i, j| if i < n { inputs[(i, j)] } else { x[j] });
    let ys = DVector::from_fn(n + 1, |i, _| if i < n { model.outputs()[i] } else { y });
    GpModel::fit(&xs, &ys, model.hyperparameters().clone()).unwrap()
}

/// Expected posterior decision entropy of one candidate by full refits at
/// every Gauss-Hermite fantasy node.
pub fn brute_force_deig(models: &[GpModel], target: &[f64], x: &[f64], d: usize, order: usize) -> f64 {
    let rule = gauss_hermite(order).unwrap();
    let pi_rule = gauss_hermite(DEFAULT_ORDER).unwrap();
    let (mu, var) = models[d].predictive_at(x).unwrap();
    let mut total = 0.0;
    for (y, w) in rule.gaussian_points(mu, var) {
        let refit = refit_with(&models[d], x, y);
        let latents: Vec<_> = models
            .iter()
            .enumerate()
            .map(|(k, m)| if k == d { &refit } else { m }.posterior_at(target).unwrap())
            .collect();
        let t = TargetPosterior::from_latents(&latents).unwrap();
        total += w * compute_pi_quadrature(&t, &pi_rule).unwrap().entropy;
    }
    total
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
