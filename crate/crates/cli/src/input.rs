//! Series files: one value per row with an optional header line.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::CliError;

/// Parses the zero-based `column` of a CSV file. A first row that is not a
/// number there is taken as a header; any later malformed row is an error
/// naming that row.
pub fn parse_series<R: Read>(reader: R, path: &Path, column: usize) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Row {
            path: path.to_owned(),
            row: e.position().map_or(i as u64 + 1, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(i as u64 + 1, |p| p.line());
        let Some(field) = record.get(column) else {
            return Err(CliError::Row {
                path: path.to_owned(),
                row,
                message: format!("expected at least {} fields, found {}", column + 1, record.len()),
            });
        };
        if field.is_empty() {
            return Err(CliError::Row { path: path.to_owned(), row, message: "missing value".into() });
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(CliError::Row {
                    path: path.to_owned(),
                    row,
                    message: format!("value '{field}' is not finite"),
                })
            }
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(CliError::Row {
                    path: path.to_owned(),
                    row,
                    message: format!("cannot parse '{field}' as a number"),
                })
            }
        }
    }
    Ok(values)
}

pub fn read_series(path: &Path, column: usize) -> Result<Vec<f64>, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    parse_series(file, path, column)
}

/// Writes `values` under a `value` header.
pub fn write_series<W: Write>(out: W, values: &[f64]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::Output(e.to_string());
    wtr.write_record(["value"]).map_err(fail)?;
    for v in values {
        wtr.write_record([v.to_string()]).map_err(fail)?;
    }
    wtr.flush().map_err(|e| CliError::Output(e.to_string()))
}
