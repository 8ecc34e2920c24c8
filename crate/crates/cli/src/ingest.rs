//! CSV ingestion: a header naming the axes then `value`, one row per cell in row-major
//! order (last axis fastest), integer cell indices.

use std::path::Path;

use crate::error::CliError;

fn err(path: &Path, message: String) -> CliError {
    CliError::Ingest { path: path.display().to_string(), message }
}

/// Reads a dense tensor with the given per-axis cell counts. Row numbers in errors
/// count data rows from 1 (the header is row 0).
pub fn ingest(path: &Path, axes: &[String], extents: &[usize]) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(path, e.to_string()))?;
    let header: Vec<String> = reader.headers().map_err(|e| err(path, e.to_string()))?.iter().map(str::to_string).collect();
    let mut want: Vec<String> = axes.to_vec();
    want.push("value".into());
    if header != want {
        return Err(err(path, format!("header {header:?} does not match {want:?}")));
    }
    let total: usize = extents.iter().product();
    let mut values = Vec::with_capacity(total);
    let mut expected = vec![0usize; extents.len()];
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| err(path, format!("row {row}: {e}")))?;
        if values.len() == total {
            return Err(err(path, format!("row {row}: extent mismatch, expected {total} rows")));
        }
        if record.len() != want.len() {
            return Err(err(path, format!("row {row}: expected {} fields, found {}", want.len(), record.len())));
        }
        for (a, want_index) in expected.iter().enumerate() {
            let got: usize = record[a]
                .parse()
                .map_err(|_| err(path, format!("row {row}: non-integer index `{}` for axis {}", &record[a], axes[a])))?;
            if got != *want_index {
                return Err(err(path, format!("row {row}: index {got} on axis {} out of row-major order (expected {want_index})", axes[a])));
            }
        }
        let v: f64 = record[axes.len()]
            .parse()
            .map_err(|_| err(path, format!("row {row}: non-numeric value `{}`", &record[axes.len()])))?;
        if !v.is_finite() {
            return Err(err(path, format!("row {row}: value is not finite")));
        }
        values.push(v);
        for a in (0..extents.len()).rev() {
            expected[a] += 1;
            if expected[a] < extents[a] {
                break;
            }
            expected[a] = 0;
        }
    }
    if values.len() != total {
        return Err(err(path, format!("row {} absent: extent mismatch, expected {total} rows, found {}", values.len() + 1, values.len())));
    }
    Ok(values)
}

/// Writes the same layout; values use the shortest round-tripping representation.
pub fn write_tensor(path: &Path, axes: &[String], extents: &[usize], values: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| err(path, e.to_string()))?;
    let mut header: Vec<String> = axes.to_vec();
    header.push("value".into());
    w.write_record(&header).map_err(|e| err(path, e.to_string()))?;
    let mut idx = vec![0usize; extents.len()];
    for v in values {
        let mut rec: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        rec.push(format!("{v:?}"));
        w.write_record(&rec).map_err(|e| err(path, e.to_string()))?;
        for a in (0..extents.len()).rev() {
            idx[a] += 1;
            if idx[a] < extents[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}
