use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::acquisition::{FantasyScheme, Strategy};
use crate::error::{Error, Result};
use crate::experiment::{
    AcquisitionSettings, GpSettings, PiChoice, PotentialOutcomesDataset, StudySpec, SyntheticConfig,
};
use crate::gp::OptimizerSettings;
use crate::mathcore::MAX_ORDER;

const DEFAULT_REPLICATIONS: i64 = 200;
const DEFAULT_N_ACQ: i64 = 5;
const DEFAULT_N_TRAIN_SYNTHETIC: i64 = 100;
const DEFAULT_N_TRAIN_EXTERNAL: i64 = 50;
const DEFAULT_PI_SAMPLES: i64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic,
    Csv(PathBuf),
}

impl DatasetSource {
    fn parse(s: &str) -> Self {
        if s == "synthetic" {
            DatasetSource::Synthetic
        } else {
            DatasetSource::Csv(PathBuf::from(s))
        }
    }

    fn describe(&self) -> String {
        match self {
            DatasetSource::Synthetic => "synthetic".into(),
            DatasetSource::Csv(p) => p.display().to_string(),
        }
    }
}

/// Command-line flags; anything given here overrides the config file.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "deig", version, about = "Decision-aware active learning studies")]
pub struct Args {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `synthetic` or a path to a potential-outcomes CSV file
    #[arg(long)]
    pub dataset: Option<String>,
    /// Comma-separated strategy names (d-eig, eig, random, d-us, t-eig)
    #[arg(long)]
    pub strategies: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub replications: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub n_acq: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub n_train: Option<i64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub workers: Option<i64>,
    /// Results CSV; traces are written alongside as `<stem>_traces.csv`
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the effective configuration and exit
    #[arg(long)]
    pub print_config: bool,
}

// Raw file layout. Integers stay signed so that negative values produce a
// range error naming the key instead of a type error.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: Option<String>,
    strategies: Option<Vec<String>>,
    replications: Option<i64>,
    n_acq: Option<i64>,
    n_train: Option<i64>,
    seed: Option<u64>,
    workers: Option<i64>,
    out: Option<PathBuf>,
    #[serde(default)]
    synthetic: RawSynthetic,
    #[serde(default)]
    gp: RawGp,
    #[serde(default)]
    acquisition: RawAcquisition,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    n_points: Option<i64>,
    dim: Option<i64>,
    n_decisions: Option<i64>,
    assignment_weights: Option<Vec<f64>>,
    signal_variances: Option<Vec<f64>>,
    lengthscale_range: Option<(f64, f64)>,
    noise_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGp {
    restarts: Option<i64>,
    bounds: Option<(f64, f64)>,
    init_range: Option<(f64, f64)>,
    max_iters: Option<i64>,
    refit_hyperparameters: Option<bool>,
    warm_start: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAcquisition {
    n_fantasy: Option<i64>,
    scheme: Option<String>,
    pi_method: Option<String>,
    pi_samples: Option<i64>,
    quadrature_order: Option<i64>,
}

/// Fully validated study configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dataset: DatasetSource,
    pub strategies: Vec<Strategy>,
    pub replications: usize,
    pub n_acq: usize,
    pub n_train: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub synthetic: SyntheticConfig,
    pub gp: GpSettings,
    pub acquisition: AcquisitionSettings,
}

fn at_least(key: &str, value: i64, min: i64) -> Result<usize> {
    if value < min {
        return Err(Error::config(key, format!("must be at least {min}, got {value}")));
    }
    usize::try_from(value).map_err(|_| Error::config(key, format!("value {value} is too large")))
}

fn in_range(key: &str, value: i64, min: i64, max: i64) -> Result<usize> {
    if value > max {
        return Err(Error::config(key, format!("must be at most {max}, got {value}")));
    }
    at_least(key, value, min)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self::resolve(RawConfig::default(), &Args::default()).expect("defaults are valid")
    }
}

impl StudyConfig {
    /// Reads `args.config` when given and applies the flag overrides.
    pub fn from_args(args: &Args) -> Result<Self> {
        let raw = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_raw(&text, path)?
            }
            None => RawConfig::default(),
        };
        Self::resolve(raw, args)
    }

    /// Parses a TOML document, then applies the flag overrides.
    pub fn from_toml_str(text: &str, args: &Args) -> Result<Self> {
        Self::resolve(parse_raw(text, Path::new("<config>"))?, args)
    }

    fn resolve(raw: RawConfig, args: &Args) -> Result<Self> {
        let dataset = DatasetSource::parse(args.dataset.as_deref().or(raw.dataset.as_deref()).unwrap_or("synthetic"));

        let names: Vec<String> = match &args.strategies {
            Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            None => raw
                .strategies
                .unwrap_or_else(|| Strategy::ALL.iter().map(|s| s.name().to_string()).collect()),
        };
        let mut strategies = Vec::with_capacity(names.len());
        for name in &names {
            let s: Strategy = name
                .parse()
                .map_err(|_| Error::config("strategies", format!("unknown strategy `{name}`")))?;
            if strategies.contains(&s) {
                return Err(Error::config("strategies", format!("`{name}` listed twice")));
            }
            strategies.push(s);
        }
        if strategies.is_empty() {
            return Err(Error::config("strategies", "at least one strategy is required"));
        }

        let default_n_train = match dataset {
            DatasetSource::Synthetic => DEFAULT_N_TRAIN_SYNTHETIC,
            DatasetSource::Csv(_) => DEFAULT_N_TRAIN_EXTERNAL,
        };
        let replications = at_least(
            "replications",
            args.replications.or(raw.replications).unwrap_or(DEFAULT_REPLICATIONS),
            1,
        )?;
        let n_acq = at_least("n_acq", args.n_acq.or(raw.n_acq).unwrap_or(DEFAULT_N_ACQ), 0)?;
        let n_train = at_least("n_train", args.n_train.or(raw.n_train).unwrap_or(default_n_train), 1)?;
        let seed = args.seed.or(raw.seed).unwrap_or(0);
        let workers = match args.workers.or(raw.workers) {
            Some(w) => in_range("workers", w, 1, 1024)?,
            None => default_workers(),
        };
        let out = args.out.clone().or(raw.out).unwrap_or_else(|| PathBuf::from("results.csv"));

        let synthetic = resolve_synthetic(raw.synthetic)?;
        let gp = resolve_gp(raw.gp)?;
        let acquisition = resolve_acquisition(raw.acquisition)?;

        let cfg = Self {
            dataset,
            strategies,
            replications,
            n_acq,
            n_train,
            seed,
            workers,
            out,
            synthetic,
            gp,
            acquisition,
        };
        if cfg.dataset == DatasetSource::Synthetic {
            cfg.check_sizes(cfg.synthetic.n_points)?;
        }
        Ok(cfg)
    }

    fn check_sizes(&self, n_points: usize) -> Result<()> {
        if self.n_train + 1 >= n_points {
            return Err(Error::config(
                "n_train",
                format!("{} leaves no pool in a dataset of {n_points} rows", self.n_train),
            ));
        }
        let pool = n_points - self.n_train - 1;
        if self.n_acq > pool {
            return Err(Error::config(
                "n_acq",
                format!("{} acquisitions requested but the pool has {pool} candidates", self.n_acq),
            ));
        }
        Ok(())
    }

    /// Size checks that need the loaded dataset.
    pub fn check_dataset(&self, ds: &PotentialOutcomesDataset) -> Result<()> {
        self.check_sizes(ds.len())
    }

    pub fn study_spec(&self) -> StudySpec {
        StudySpec {
            replications: self.replications,
            strategies: self.strategies.clone(),
            n_acq: self.n_acq,
            n_train: self.n_train,
            base_seed: self.seed,
            gp: self.gp.clone(),
            acquisition: self.acquisition.clone(),
            workers: self.workers,
        }
    }

    /// Effective configuration as TOML. `workers` and `out` are left out:
    /// neither changes the results, and the echo is part of the results file.
    pub fn echo(&self) -> String {
        let (pi_method, pi_samples) = match self.acquisition.pi {
            PiChoice::Quadrature => ("quadrature", None),
            PiChoice::MonteCarlo { samples } => ("mc", Some(samples as u64)),
        };
        let echo = Echo {
            dataset: self.dataset.describe(),
            strategies: self.strategies.iter().map(|s| s.name().to_string()).collect(),
            replications: self.replications as u64,
            n_acq: self.n_acq as u64,
            n_train: self.n_train as u64,
            seed: self.seed,
            synthetic: (self.dataset == DatasetSource::Synthetic).then(|| EchoSynthetic {
                n_points: self.synthetic.n_points as u64,
                dim: self.synthetic.dim as u64,
                n_decisions: self.synthetic.n_decisions as u64,
                assignment_weights: self.synthetic.assignment_weights.clone(),
                signal_variances: self.synthetic.signal_variances.clone(),
                lengthscale_range: self.synthetic.lengthscale_range,
                noise_fraction: self.synthetic.noise_fraction,
            }),
            gp: EchoGp {
                restarts: self.gp.optimizer.restarts as u64,
                bounds: self.gp.optimizer.bounds,
                init_range: self.gp.optimizer.init_range,
                max_iters: self.gp.optimizer.max_iters,
                refit_hyperparameters: self.gp.refit_hyperparameters,
                warm_start: self.gp.warm_start,
            },
            acquisition: EchoAcquisition {
                n_fantasy: self.acquisition.n_fantasy as u64,
                scheme: self.acquisition.scheme.to_string(),
                pi_method: pi_method.into(),
                pi_samples,
                quadrature_order: self.acquisition.quadrature_order as u64,
            },
        };
        toml::to_string(&echo).expect("config echo serializes")
    }
}

fn parse_raw(text: &str, path: &Path) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        // toml reports unknown fields as "unknown field `name`, expected ..."
        let key = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field"))
            .map_or_else(|| path.display().to_string(), str::to_string);
        Error::config(key, message)
    })
}

fn check_pair(key: &str, pair: (f64, f64)) -> Result<()> {
    if !(pair.0 > 0.0 && pair.0 < pair.1 && pair.1.is_finite()) {
        return Err(Error::config(key, format!("need 0 < lo < hi, got [{}, {}]", pair.0, pair.1)));
    }
    Ok(())
}

fn resolve_synthetic(raw: RawSynthetic) -> Result<SyntheticConfig> {
    let d = SyntheticConfig::default();
    let n_decisions = match raw.n_decisions {
        Some(k) => at_least("synthetic.n_decisions", k, 2)?,
        None => d.n_decisions,
    };
    let cfg = SyntheticConfig {
        n_points: raw.n_points.map_or(Ok(d.n_points), |v| at_least("synthetic.n_points", v, 3))?,
        dim: raw.dim.map_or(Ok(d.dim), |v| at_least("synthetic.dim", v, 1))?,
        n_decisions,
        assignment_weights: raw.assignment_weights.unwrap_or(d.assignment_weights),
        signal_variances: raw.signal_variances.unwrap_or(d.signal_variances),
        lengthscale_range: raw.lengthscale_range.unwrap_or(d.lengthscale_range),
        noise_fraction: raw.noise_fraction.unwrap_or(d.noise_fraction),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_gp(raw: RawGp) -> Result<GpSettings> {
    let d = OptimizerSettings::default();
    let optimizer = OptimizerSettings {
        restarts: raw.restarts.map_or(Ok(d.restarts), |v| in_range("gp.restarts", v, 1, 1000))?,
        bounds: raw.bounds.unwrap_or(d.bounds),
        init_range: raw.init_range.unwrap_or(d.init_range),
        max_iters: raw
            .max_iters
            .map_or(Ok(d.max_iters as usize), |v| at_least("gp.max_iters", v, 1))? as u64,
    };
    check_pair("gp.bounds", optimizer.bounds)?;
    check_pair("gp.init_range", optimizer.init_range)?;
    optimizer.validate()?;
    Ok(GpSettings {
        optimizer,
        refit_hyperparameters: raw.refit_hyperparameters.unwrap_or(true),
        warm_start: raw.warm_start.unwrap_or(true),
    })
}

fn resolve_acquisition(raw: RawAcquisition) -> Result<AcquisitionSettings> {
    let d = AcquisitionSettings::default();
    let scheme = match raw.scheme {
        Some(s) => s
            .parse::<FantasyScheme>()
            .map_err(|_| Error::config("acquisition.scheme", format!("expected `mc` or `gauss-hermite`, got `{s}`")))?,
        None => d.scheme,
    };
    let samples = raw
        .pi_samples
        .map_or(Ok(DEFAULT_PI_SAMPLES as usize), |v| at_least("acquisition.pi_samples", v, 1))?;
    let pi = match raw.pi_method.as_deref() {
        None | Some("quadrature") => PiChoice::Quadrature,
        Some("mc") => PiChoice::MonteCarlo { samples },
        Some(other) => {
            return Err(Error::config(
                "acquisition.pi_method",
                format!("expected `quadrature` or `mc`, got `{other}`"),
            ))
        }
    };
    Ok(AcquisitionSettings {
        n_fantasy: raw
            .n_fantasy
            .map_or(Ok(d.n_fantasy), |v| in_range("acquisition.n_fantasy", v, 1, 100_000))?,
        scheme,
        pi,
        quadrature_order: raw.quadrature_order.map_or(Ok(d.quadrature_order), |v| {
            in_range("acquisition.quadrature_order", v, 1, MAX_ORDER as i64)
        })?,
    })
}

#[derive(Serialize)]
struct Echo {
    dataset: String,
    strategies: Vec<String>,
    replications: u64,
    n_acq: u64,
    n_train: u64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic: Option<EchoSynthetic>,
    gp: EchoGp,
    acquisition: EchoAcquisition,
}

#[derive(Serialize)]
struct EchoSynthetic {
    n_points: u64,
    dim: u64,
    n_decisions: u64,
    assignment_weights: Vec<f64>,
    signal_variances: Vec<f64>,
    lengthscale_range: (f64, f64),
    noise_fraction: f64,
}

#[derive(Serialize)]
struct EchoGp {
    restarts: u64,
    bounds: (f64, f64),
    init_range: (f64, f64),
    max_iters: u64,
    refit_hyperparameters: bool,
    warm_start: bool,
}

#[derive(Serialize)]
struct EchoAcquisition {
    n_fantasy: u64,
    scheme: String,
    pi_method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pi_samples: Option<u64>,
    quadrature_order: u64,
}
