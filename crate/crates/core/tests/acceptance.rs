//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use deig::acquisition::{deig_gains, score_deig, score_eig_us, Candidate, DEigConfig, FantasyScheme, Strategy};
use deig::cli::{self, Args, StudyConfig};
use deig::decision::{compute_pi_quadrature, estimate_pi_mc, PiEstimator, TargetPosterior};
use deig::experiment::{generate_synthetic, run_study, AcquisitionSettings, GpSettings, StudySpec, SyntheticConfig};
use deig::gp::{ArdSeKernel, GpHyperparameters, GpModel};
use deig::mathcore::{expect_gaussian, gauss_hermite, gaussian_entropy, normal_cdf, DEFAULT_ORDER};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(started: Instant, budget: Duration, detail: String) -> Outcome {
    let elapsed = started.elapsed();
    check(
        elapsed < budget,
        format!("{detail}; {:.1}s of {}s budget", elapsed.as_secs_f64(), budget.as_secs()),
    )
}

/// Exact k-th raw moment of N(mu, var).
fn gaussian_moment(m: u32, mu: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    let mut total = 0.0;
    let mut binom = 1.0;
    let mut z_moment = 1.0; // E[z^j], odd moments vanish
    for j in 0..=m {
        if j % 2 == 0 {
            total += binom * mu.powi((m - j) as i32) * sd.powi(j as i32) * z_moment;
            z_moment *= (j + 1) as f64;
        }
        binom *= (m - j) as f64 / (j + 1) as f64;
    }
    total
}

fn exact_math() -> Outcome {
    let started = Instant::now();
    let h = gaussian_entropy(1.0).unwrap();
    if (h - 1.418939).abs() > 1e-6 {
        return Err(format!("gaussian_entropy(1) = {h}"));
    }
    let (mu, var) = (0.7, 1.3);
    let mut worst_moment: f64 = 0.0;
    for order in 1..=DEFAULT_ORDER {
        let rule = gauss_hermite(order).unwrap();
        for m in 0..=(2 * order as u32 - 1) {
            let got = expect_gaussian(|y| y.powi(m as i32), mu, var, &rule);
            let want = gaussian_moment(m, mu, var);
            worst_moment = worst_moment.max((got - want).abs() / want.abs());
        }
    }
    if worst_moment > 1e-10 {
        return Err(format!("moment relative error {worst_moment:.2e}"));
    }
    let mut rng = rng(2024);
    let mut worst_gp: f64 = 0.0;
    for case in 0..50 {
        let n = 4 * case + rng.random_range(0..4);
        let p = 1 + case % 5;
        let model = random_model(&mut rng, n.min(200), p);
        for _ in 0..4 {
            let x = random_point(&mut rng, p, 2.5);
            let got = model.posterior_at(&x).unwrap();
            let (pm, pv) = model.predictive_at(&x).unwrap();
            let want = dense_posterior(&model, &x);
            let scale = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
            worst_gp = worst_gp
                .max(scale(got.mean, want.mean))
                .max(scale(got.variance, want.variance))
                .max(scale(pm, want.mean))
                .max(scale(pv, want.variance + model.noise_variance()));
        }
    }
    if worst_gp > 1e-8 {
        return Err(format!("GP vs dense oracle error {worst_gp:.2e}"));
    }
    within_budget(
        started,
        Duration::from_secs(10),
        format!("H(1) = {h:.6}, GH moments <= {worst_moment:.1e} (orders 1..=20), GP vs dense <= {worst_gp:.1e}"),
    )
}

fn pi_oracle() -> Outcome {
    let started = Instant::now();
    let rule = gauss_hermite(DEFAULT_ORDER).unwrap();
    let mut rng = rng(77);
    let mut worst_mc: f64 = 0.0;
    for case in 0..100 {
        let k = 2 + case % 4;
        let means: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vars: Vec<f64> = (0..k).map(|_| log_uniform(&mut rng, 0.01, 4.0)).collect();
        let t = TargetPosterior::new(means, vars).unwrap();
        let q = compute_pi_quadrature(&t, &rule).unwrap();
        let mc = estimate_pi_mc(&t, 1_000_000, case as u64).unwrap();
        for (a, b) in q.pi.iter().zip(&mc.pi) {
            worst_mc = worst_mc.max((a - b).abs());
        }
    }
    let mut worst_pair: f64 = 0.0;
    for _ in 0..200 {
        let means = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let vars = vec![log_uniform(&mut rng, 0.01, 4.0), log_uniform(&mut rng, 0.01, 4.0)];
        let want = normal_cdf((means[0] - means[1]) / (vars[0] + vars[1]).sqrt());
        let t = TargetPosterior::new(means, vars).unwrap();
        let q = compute_pi_quadrature(&t, &rule).unwrap();
        worst_pair = worst_pair.max((q.pi[0] - want).abs());
    }
    if worst_mc > 0.005 || worst_pair > 1e-6 {
        return Err(format!("quadrature vs MC {worst_mc:.2e} (tol 5e-3), K=2 closed form {worst_pair:.2e} (tol 1e-6)"));
    }
    within_budget(
        started,
        Duration::from_secs(60),
        format!("quadrature vs MC(1e6) <= {worst_mc:.1e} on 100 instances, K=2 closed form <= {worst_pair:.1e}"),
    )
}

fn fantasy_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(5150);
    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let p = 1 + case % 4;
        let n = case % 60;
        let model = if n == 0 {
            GpModel::prior(random_hyper(&mut rng, p))
        } else {
            random_model(&mut rng, n, p)
        };
        let target = random_point(&mut rng, p, 2.0);
        let state = model.target_state(&target).unwrap();
        let xj = random_point(&mut rng, p, 2.0);
        let y: f64 = rng.random_range(-3.0..3.0);
        let fast = model.fantasy_posterior_at(&state, &xj, y).unwrap();
        let slow = refit_with(&model, &xj, y).posterior_at(&target).unwrap();
        worst = worst.max((fast.mean - slow.mean).abs()).max((fast.variance - slow.variance).abs());
    }
    if worst > 1e-8 {
        return Err(format!("fantasy vs refit error {worst:.2e}"));
    }
    within_budget(started, Duration::from_secs(30), format!("500 triples, max error {worst:.1e}"))
}

fn criterion_identities() -> Outcome {
    let started = Instant::now();
    let pi = PiEstimator::Quadrature(gauss_hermite(DEFAULT_ORDER).unwrap());
    let cfg = DEigConfig {
        n_fantasy: 20,
        scheme: FantasyScheme::GaussHermite,
        pi: pi.clone(),
        seed: 1,
        round: 1,
    };
    let mut rng = rng(4242);
    let mut worst_zero: f64 = 0.0;
    let pools = 30;
    for _ in 0..pools {
        let k = rng.random_range(2..5);
        let p = rng.random_range(1..4);
        let models: Vec<_> = (0..k)
            .map(|_| {
                let n = rng.random_range(3..25);
                random_model(&mut rng, n, p)
            })
            .collect();
        let target = random_point(&mut rng, p, 1.0);
        let mut pool: Vec<_> = (0..20)
            .map(|i| Candidate {
                index: i,
                x: random_point(&mut rng, p, 2.0),
                decision: rng.random_range(0..k),
            })
            .collect();
        // one candidate with exactly zero covariance to the target
        pool.push(Candidate {
            index: 20,
            x: vec![1e3; p],
            decision: 0,
        });
        let latents: Vec<_> = models.iter().map(|m| m.posterior_at(&target).unwrap()).collect();
        let h = pi.posterior(&TargetPosterior::from_latents(&latents).unwrap()).unwrap().entropy;
        let scores = score_deig(&models, &pool, &target, &cfg).unwrap();
        let by_score = scores.select().unwrap();
        let by_gain = deig_gains(&scores, h).select().unwrap();
        if by_score != by_gain {
            return Err(format!("argmin score {by_score} != argmax gain {by_gain}"));
        }
        worst_zero = worst_zero.max((scores.scores[20] - h).abs());

        // shared noise: the EIG pick is the max predictive variance
        let noise = log_uniform(&mut rng, 1e-2, 1.0);
        let shared: Vec<_> = (0..k)
            .map(|_| {
                let (x, y) = random_data(&mut rng, 10, p);
                let kernel = ArdSeKernel::new(
                    log_uniform(&mut rng, 0.3, 3.0),
                    (0..p).map(|_| log_uniform(&mut rng, 0.3, 3.0)).collect(),
                )
                .unwrap();
                GpModel::fit(&x, &y, GpHyperparameters::new(kernel, noise).unwrap()).unwrap()
            })
            .collect();
        let chosen = score_eig_us(&shared, &pool).unwrap().select().unwrap();
        let var = |c: &Candidate| shared[c.decision].predictive_at(&c.x).unwrap().1;
        let best = (0..pool.len()).fold(0, |b, i| if var(&pool[i]) > var(&pool[b]) { i } else { b });
        if chosen != best {
            return Err(format!("EIG picked {chosen}, max variance is {best}"));
        }
    }
    if worst_zero > 1e-6 {
        return Err(format!("zero-covariance score differs from H by {worst_zero:.2e}"));
    }
    within_budget(
        started,
        Duration::from_secs(30),
        format!("{pools} pools: argmin/argmax identical, zero-covariance gap {worst_zero:.1e}, EIG = max variance"),
    )
}

fn synthetic_reproduction() -> Outcome {
    let started = Instant::now();
    let ds = generate_synthetic(&SyntheticConfig::default(), 2024).unwrap();
    let spec = StudySpec {
        replications: 50,
        strategies: Strategy::ALL.to_vec(),
        n_acq: 5,
        n_train: 100,
        base_seed: 2024,
        gp: GpSettings::default(),
        acquisition: AcquisitionSettings::default(),
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let result = run_study(&ds, &spec).unwrap();
    let series = |s: Strategy, f: fn(&deig::experiment::AggregateRow) -> f64| -> Vec<f64> {
        result.rows_for(s).map(f).collect()
    };
    let h_deig = series(Strategy::DEig, |r| r.mean_entropy);
    let h_rand = series(Strategy::Random, |r| r.mean_entropy);
    let a_deig = series(Strategy::DEig, |r| r.mean_accuracy);
    let a_rand = series(Strategy::Random, |r| r.mean_accuracy);
    let failures: usize = result.table.iter().filter(|r| r.step == 0).map(|r| r.n_failed).sum();

    let mut problems = Vec::new();
    let worst_rise = h_deig.windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);
    if worst_rise > 0.01 {
        problems.push(format!("(a) H(d-eig) rises by {worst_rise:.4}"));
    }
    let (hd, hr) = (h_deig[5], h_rand[5]);
    if hd >= hr {
        problems.push(format!("(b) final H d-eig {hd:.4} >= random {hr:.4}"));
    }
    let (ad, ar) = (a_deig[5], a_rand[5]);
    if ad < ar - 0.02 {
        problems.push(format!("(c) final A d-eig {ad:.3} < random {ar:.3} - 0.02"));
    }
    let step0: Vec<_> = result.table.iter().filter(|r| r.step == 0).collect();
    if step0.iter().any(|r| {
        r.mean_entropy.to_bits() != step0[0].mean_entropy.to_bits()
            || r.mean_accuracy.to_bits() != step0[0].mean_accuracy.to_bits()
    }) {
        problems.push("(d) step-0 metrics differ across strategies".into());
    }
    let curve = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let finals: Vec<String> = Strategy::ALL
        .iter()
        .map(|&s| format!("{}={:.3}", s.name(), series(s, |r| r.mean_entropy)[5]))
        .collect();
    let detail = format!(
        "H(d-eig) {}, H(random) {}; final A d-eig {ad:.2} random {ar:.2}; final H {}; {failures} failed",
        curve(&h_deig),
        curve(&h_rand),
        finals.join(" ")
    );
    if !problems.is_empty() {
        return Err(format!("{}; {detail}", problems.join("; ")));
    }
    within_budget(started, Duration::from_secs(30 * 60), detail)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.toml");
    std::fs::write(
        &config,
        "replications = 6\nn_acq = 2\nn_train = 30\nseed = 99\n[synthetic]\nn_points = 80\n[gp]\nrestarts = 2\n",
    )
    .unwrap();
    let mut reference: Option<Vec<u8>> = None;
    for (run, workers) in [1, 1, 2, 4, 8].into_iter().enumerate() {
        let args = Args {
            config: Some(config.clone()),
            workers: Some(workers),
            out: Some(dir.path().join(format!("run{run}.csv"))),
            ..Args::default()
        };
        let cfg = StudyConfig::from_args(&args).unwrap();
        cli::run(&cfg).unwrap();
        let bytes = std::fs::read(&cfg.out).unwrap();
        match &reference {
            None => reference = Some(bytes),
            Some(r) if *r != bytes => return Err(format!("results differ with {workers} workers")),
            _ => {}
        }
    }
    Ok("5 runs (workers 1, 1, 2, 4, 8) produced byte-identical results CSVs".into())
}

fn default_echo() -> Outcome {
    let synthetic = StudyConfig::from_toml_str("", &Args::default()).unwrap().echo();
    let external = StudyConfig::from_toml_str("dataset = \"data.csv\"", &Args::default()).unwrap().echo();
    let missing: Vec<&str> = [
        "replications = 200",
        "n_acq = 5",
        "n_train = 100",
        "n_points = 400",
        "dim = 5",
        "n_decisions = 4",
    ]
    .into_iter()
    .filter(|line| !synthetic.lines().any(|l| l == *line))
    .chain((!external.lines().any(|l| l == "n_train = 50")).then_some("n_train = 50 (external)"))
    .collect();
    check(
        missing.is_empty(),
        if missing.is_empty() {
            "M=200, n_acq=5, n_train=100/50, N=400, p=5, K=4 present in the echo".into()
        } else {
            format!("missing from echo: {}", missing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("exact math", exact_math),
        ("pi oracle equivalence", pi_oracle),
        ("fantasy update oracle", fantasy_oracle),
        ("criterion identities", criterion_identities),
        ("synthetic reproduction", synthetic_reproduction),
        ("determinism", determinism),
        ("default config echo", default_echo),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS - {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL - {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
