use std::io::Write;

use super::StudyConfig;
use crate::experiment::{AggregateRow, StudyResult};

/// Header comments with the effective config, then one row per strategy and step.
pub fn write_results_csv<W: Write>(mut w: W, cfg: &StudyConfig, result: &StudyResult) -> std::io::Result<()> {
    for line in cfg.echo().lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "strategy,step,mean_A,sem_A,mean_H,sem_H,n_ok,n_failed")?;
    for r in &result.table {
        writeln!(
            w,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.strategy, r.step, r.mean_accuracy, r.sem_accuracy, r.mean_entropy, r.sem_entropy, r.n_ok, r.n_failed
        )?;
    }
    Ok(())
}

/// Raw per-replication traces. Rows and decisions are 1-based like the dataset file.
pub fn write_traces_csv<W: Write>(w: W, result: &StudyResult) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "replication",
        "strategy",
        "step",
        "A",
        "H",
        "selected_row",
        "selected_decision",
        "wall_time_s",
        "truncated",
        "error",
    ])?;
    for o in &result.outcomes {
        let rep = o.replication.to_string();
        let name = o.strategy.name();
        match &o.trace {
            Ok(trace) => {
                for s in &trace.steps {
                    let (row, d) = s
                        .selected
                        .map_or((String::new(), String::new()), |(i, d)| ((i + 1).to_string(), (d + 1).to_string()));
                    out.write_record([
                        rep.as_str(),
                        name,
                        &s.step.to_string(),
                        if s.correct { "1" } else { "0" },
                        &format!("{:.16e}", s.entropy),
                        &row,
                        &d,
                        &format!("{:.6}", s.wall_time.as_secs_f64()),
                        if trace.truncated { "1" } else { "0" },
                        "",
                    ])?;
                }
            }
            Err(e) => out.write_record([rep.as_str(), name, "", "", "", "", "", "", "", e])?,
        }
    }
    out.flush()
}

/// Human-readable table for the terminal.
pub fn summary_table(rows: &[AggregateRow]) -> String {
    let mut s = format!(
        "{:<8} {:>4}  {:>17}  {:>17}  {:>5} {:>6}\n",
        "strategy", "step", "accuracy", "entropy", "ok", "failed"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<8} {:>4}  {:>7.4} ± {:<7.4}  {:>7.4} ± {:<7.4}  {:>5} {:>6}\n",
            r.strategy.name(),
            r.step,
            r.mean_accuracy,
            r.sem_accuracy,
            r.mean_entropy,
            r.sem_entropy,
            r.n_ok,
            r.n_failed
        ));
    }
    s
}
