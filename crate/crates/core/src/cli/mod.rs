//! Command-line front end: configuration, dataset files and result export.

mod config;
mod dataset_csv;
mod report;

use std::path::{Path, PathBuf};

use log::info;

pub use config::{Args, DatasetSource, StudyConfig};
pub use dataset_csv::{load_dataset_csv, write_dataset_csv};
pub use report::{summary_table, write_results_csv, write_traces_csv};

use crate::error::{Error, Result};
use crate::experiment::{generate_synthetic, run_study, PotentialOutcomesDataset, StudyResult};

/// Loads or generates the dataset named by the configuration.
pub fn dataset(cfg: &StudyConfig) -> Result<PotentialOutcomesDataset> {
    match &cfg.dataset {
        DatasetSource::Synthetic => generate_synthetic(&cfg.synthetic, cfg.seed),
        DatasetSource::Csv(path) => load_dataset_csv(path),
    }
}

/// Per-replication traces go next to the results file.
pub fn traces_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    out.with_file_name(format!("{stem}_traces.csv"))
}

/// Runs the configured study and writes the results and trace files.
pub fn run(cfg: &StudyConfig) -> Result<StudyResult> {
    let ds = dataset(cfg)?;
    cfg.check_dataset(&ds)?;
    info!(
        "dataset: N = {}, p = {}, K = {}; {} replications x {} strategies",
        ds.len(),
        ds.dim(),
        ds.n_decisions(),
        cfg.replications,
        cfg.strategies.len()
    );
    let result = run_study(&ds, &cfg.study_spec())?;
    write_file(&cfg.out, |w| write_results_csv(w, cfg, &result))?;
    write_file(&traces_path(&cfg.out), |w| write_traces_csv(w, &result))?;
    Ok(result)
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    f(&mut buf).map_err(io)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, buf).map_err(io)
}
