use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::experiment::{PotentialOutcomesDataset, Provenance};

fn parse_err(path: &Path, row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Splits a header into `(p, K)`, requiring exactly
/// `x1..xp, y_true_1..y_true_K, y_obs_1..y_obs_K, d`.
fn layout(path: &Path, header: &csv::StringRecord) -> Result<(usize, usize)> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let p = names
        .iter()
        .enumerate()
        .take_while(|(i, n)| **n == format!("x{}", i + 1))
        .count();
    let rest = names.len().saturating_sub(p + 1);
    if p == 0 || rest % 2 != 0 || names.last() != Some(&"d") {
        return Err(parse_err(
            path,
            1,
            "header",
            "expected x1..xp,y_true_1..y_true_K,y_obs_1..y_obs_K,d",
        ));
    }
    let k = rest / 2;
    if k < 2 {
        return Err(parse_err(path, 1, "header", format!("need at least 2 decisions, found {k}")));
    }
    for j in 0..k {
        for (offset, prefix) in [(p, "y_true"), (p + k, "y_obs")] {
            let expected = format!("{prefix}_{}", j + 1);
            if names[offset + j] != expected {
                return Err(parse_err(
                    path,
                    1,
                    names[offset + j],
                    format!("expected column `{expected}`"),
                ));
            }
        }
    }
    Ok((p, k))
}

/// Reads a potential-outcomes CSV. Rows in errors are file lines (the header
/// is line 1); `d` is 1-based in the file and 0-based in memory.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<PotentialOutcomesDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let (p, k) = layout(path, &header)?;

    let mut x = Vec::new();
    let mut y_true = Vec::new();
    let mut y_obs = Vec::new();
    let mut assigned = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        for (j, cell) in record.iter().enumerate().take(p + 2 * k) {
            let value: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, &header[j], format!("not a number: `{cell}`")))?;
            if !value.is_finite() {
                return Err(parse_err(path, line, &header[j], format!("non-finite value `{cell}`")));
            }
            match j {
                j if j < p => x.push(value),
                j if j < p + k => y_true.push(value),
                _ => y_obs.push(value),
            }
        }
        let cell = record[p + 2 * k].trim();
        let d: usize = cell
            .parse()
            .map_err(|_| parse_err(path, line, "d", format!("not a decision label: `{cell}`")))?;
        if d < 1 || d > k {
            return Err(parse_err(path, line, "d", format!("decision {d} outside 1..={k}")));
        }
        assigned.push(d - 1);
    }
    let n = assigned.len();
    PotentialOutcomesDataset::new(
        DMatrix::from_row_slice(n, p, &x),
        DMatrix::from_row_slice(n, k, &y_true),
        DMatrix::from_row_slice(n, k, &y_obs),
        assigned,
        Provenance::External,
    )
    .map_err(|e| parse_err(path, 0, "", e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => parse_err(path, row, "", format!("{kind:?}")),
    }
}

/// Writes the dataset in the format read by [`load_dataset_csv`]. Values use
/// 17 significant digits so a round trip is exact.
pub fn write_dataset_csv<W: Write>(w: W, ds: &PotentialOutcomesDataset) -> std::io::Result<()> {
    let (p, k) = (ds.dim(), ds.n_decisions());
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = (1..=p)
        .map(|j| format!("x{j}"))
        .chain((1..=k).map(|j| format!("y_true_{j}")))
        .chain((1..=k).map(|j| format!("y_obs_{j}")))
        .chain(["d".to_string()])
        .collect();
    out.write_record(&header)?;
    for i in 0..ds.len() {
        let row: Vec<String> = ds
            .x
            .row(i)
            .iter()
            .chain(ds.y_true.row(i).iter())
            .chain(ds.y_obs.row(i).iter())
            .map(|v| format!("{v:.16e}"))
            .chain([(ds.assigned[i] + 1).to_string()])
            .collect();
        out.write_record(&row)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "x1,x2,y_true_1,y_true_2,y_obs_1,y_obs_2,d\n";

    #[test]
    fn three_row_file() {
        let f = file(&format!(
            "{HEADER}0.1,0.2,1.0,2.0,1.1,2.1,1\n0.3,0.4,3.0,1.0,3.2,0.9,2\n-1,0,0.5,0.5,0.4,0.6,2\n"
        ));
        let ds = load_dataset_csv(f.path()).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.n_decisions()), (3, 2, 2));
        assert_eq!(ds.assigned, vec![0, 1, 1]);
        assert_eq!(ds.y_obs[(1, 0)], 3.2);
        assert_eq!(ds.provenance, Provenance::External);
    }

    #[test]
    fn decision_out_of_range_cites_row() {
        let f = file(&format!("{HEADER}0.1,0.2,1.0,2.0,1.1,2.1,1\n0.3,0.4,3.0,1.0,3.2,0.9,5\n"));
        match load_dataset_csv(f.path()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "d");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_numeric_cell_cites_column() {
        let f = file(&format!("{HEADER}0.1,abc,1.0,2.0,1.1,2.1,1\n"));
        match load_dataset_csv(f.path()).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column.as_str()), (2, "x2")),
            e => panic!("unexpected {e}"),
        }
        let f = file(&format!("{HEADER}0.1,,1.0,2.0,1.1,2.1,1\n"));
        assert!(matches!(load_dataset_csv(f.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn malformed_headers() {
        for header in [
            "x1,y_true_1,y_obs_1,d\n",
            "x1,y_true_1,y_true_2,y_obs_2,y_obs_1,d\n",
            "a,b,d\n",
            "x1,y_true_1,y_true_2,y_obs_1,y_obs_2\n",
        ] {
            let f = file(header);
            assert!(matches!(load_dataset_csv(f.path()), Err(Error::Parse { .. })), "{header}");
        }
        let f = file("x1,y_true_1,y_true_2,y_obs_1,y_obs_2,d\n0,1,2,3\n");
        assert!(load_dataset_csv(f.path()).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_dataset_csv("/nonexistent/data.csv"), Err(Error::Io { .. })));
    }
}
