//! Plain-text matrix files and key=value sidecars.
//!
//! Matrices are CSV with one row per line, no header and `.` as the decimal
//! point. Values are written with the shortest representation that
//! round-trips, so files reproduce bit-for-bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::DenseSymMatrix;

/// Reads a rectangular matrix. Ragged rows and unparsable cells are errors.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Error::Input(format!(
                        "{}: cannot parse {cell:?} at row {}, column {}",
                        path.display(),
                        line + 1,
                        col + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Input(format!(
                    "{}: row {} has {} entries, expected {}",
                    path.display(),
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{}: empty matrix file", path.display())));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// Reads a square symmetric matrix.
pub fn read_sym_csv(path: &Path) -> Result<DenseSymMatrix> {
    DenseSymMatrix::new(read_matrix_csv(path)?)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for i in 0..m.nrows() {
        writer.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes `key=value` lines in the given order.
pub fn write_key_values(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for (k, v) in entries {
        writeln!(f, "{k}={v}")?;
    }
    Ok(())
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_key_values(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1e-300, 3.0, 1.0 / 3.0, 2e10, -0.0]);
        write_matrix_csv(&path, &m).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(m.shape(), back.shape());
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("r.csv");
        fs::write(&ragged, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix_csv(&ragged), Err(Error::Input(_))));
        let bad = dir.path().join("b.csv");
        fs::write(&bad, "1,x\n").unwrap();
        assert!(matches!(read_matrix_csv(&bad), Err(Error::Input(_))));
        let empty = dir.path().join("e.csv");
        fs::write(&empty, "").unwrap();
        assert!(read_matrix_csv(&empty).is_err());
        let comma_decimal = dir.path().join("c.csv");
        fs::write(&comma_decimal, "\"1,5\"\n").unwrap();
        assert!(read_matrix_csv(&comma_decimal).is_err());
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# header\nkind = random\n\np=50\n").unwrap();
        assert_eq!(kv["kind"], "random");
        assert_eq!(kv["p"], "50");
        assert!(parse_key_values("novalue\n").is_err());
    }
}
