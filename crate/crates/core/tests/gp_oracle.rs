mod common;

use common::*;
use deig::gp::{GpHyperparameters, GpModel};
use nalgebra::{DMatrix, DVector};

#[test]
fn posterior_matches_dense_solve() {
    let mut rng = rng(11);
    for case in 0..50 {
        let n = 1 + (case * 37) % 200;
        let p = 1 + case % 4;
        let model = random_model(&mut rng, n, p);
        for _ in 0..5 {
            let x = random_point(&mut rng, p, 2.5);
            let got = model.posterior_at(&x).unwrap();
            let want = dense_posterior(&model, &x);
            assert!(close(got.mean, want.mean, 1e-8), "case {case}: mean {} vs {}", got.mean, want.mean);
            assert!(
                close(got.variance, want.variance, 1e-8),
                "case {case}: var {} vs {}",
                got.variance,
                want.variance
            );
            let (pm, pv) = model.predictive_at(&x).unwrap();
            assert_eq!(pm, got.mean);
            assert!((pv - got.variance - model.noise_variance()).abs() < 1e-14);
        }
    }
}

#[test]
fn alpha_residual_is_small() {
    let mut rng = rng(3);
    let model = random_model(&mut rng, 150, 3);
    let x = model.inputs();
    let k = model.kernel();
    let n = model.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        k.eval(&rows[i], &rows[j]).unwrap() + if i == j { model.noise_variance() } else { 0.0 }
    });
    let r = &gram * model.alpha() - model.outputs();
    assert!(r.norm() / model.outputs().norm() < 1e-6);
}

#[test]
fn fantasy_update_matches_refit() {
    let mut rng = rng(5);
    for case in 0..100 {
        let p = 1 + case % 3;
        let n = case % 40;
        let model = if n == 0 {
            GpModel::prior(random_hyper(&mut rng, p))
        } else {
            random_model(&mut rng, n, p)
        };
        let target = random_point(&mut rng, p, 2.0);
        let state = model.target_state(&target).unwrap();
        let xj = random_point(&mut rng, p, 2.0);
        let y = rng_normal(&mut rng) * 2.0;
        let fast = model.fantasy_posterior_at(&state, &xj, y).unwrap();
        let slow = refit_with(&model, &xj, y).posterior_at(&target).unwrap();
        assert!((fast.mean - slow.mean).abs() < 1e-8, "case {case}");
        assert!((fast.variance - slow.variance).abs() < 1e-8, "case {case}");
    }
}

#[test]
fn with_observation_is_a_fixed_hyperparameter_refit() {
    let mut rng = rng(8);
    let model = random_model(&mut rng, 20, 2);
    let xj = vec![0.3, -0.4];
    let updated = model.with_observation(&xj, 1.5).unwrap();
    assert_eq!(updated.hyperparameters(), model.hyperparameters());
    let oracle = refit_with(&model, &xj, 1.5);
    let t = vec![0.1, 0.1];
    assert!((updated.posterior_at(&t).unwrap().mean - oracle.posterior_at(&t).unwrap().mean).abs() < 1e-12);
}

#[test]
fn empty_model_is_prior() {
    let hyper = GpHyperparameters::default_for(2);
    let model = GpModel::fit(&DMatrix::zeros(0, 2), &DVector::zeros(0), hyper).unwrap();
    let post = model.posterior_at(&[0.5, 0.5]).unwrap();
    assert_eq!(post.mean, 0.0);
    assert_eq!(post.variance, 1.0);
    assert!(model.log_marginal_likelihood().is_err());
}

fn rng_normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.sample(rand_distr::StandardNormal)
}
