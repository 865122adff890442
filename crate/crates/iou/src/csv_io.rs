//! CSV ingestion and export.
//!
//! The dialect is fixed: comma separated, one header row, `.` as decimal
//! point, UTF-8. Every column is numeric. One column may be designated as the
//! response; the rest are features in file order.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use iou_core::DataMatrix;

use crate::error::{CliError, CliResult};

/// A data matrix together with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub response_name: Option<String>,
    pub matrix: DataMatrix,
}

pub fn read_table(path: &Path, response: Option<&str>) -> CliResult<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_table(file, response).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_table(reader: impl std::io::Read, response: Option<&str>) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Data("missing header row".into()));
    }
    let response_col = match response {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CliError::Data(format!("response column `{name}` not found")))?,
        ),
        None => None,
    };
    let p = header.len() - usize::from(response_col.is_some());
    if p == 0 {
        return Err(CliError::Data("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!("row {} column `{}`: `{field}` is not a number", line + 2, header[j]))
            })?;
            if Some(j) == response_col {
                y.push(v);
            } else {
                values.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Data("no data rows".into()));
    }
    let mut matrix = DataMatrix::new(rows, p, values).map_err(|e| CliError::Data(e.to_string()))?;
    if response_col.is_some() {
        matrix = matrix.with_response(y).map_err(|e| CliError::Data(e.to_string()))?;
    }
    let feature_names = header
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != response_col)
        .map(|(_, h)| h.clone())
        .collect();
    Ok(Table {
        feature_names,
        response_name: response_col.map(|j| header[j].clone()),
        matrix,
    })
}

/// Writes features first, then the response column if present. Values use
/// the shortest decimal form that parses back to the same `f64`.
pub fn write_table(table: &Table, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = table.feature_names.clone();
    header.extend(table.response_name.clone());
    w.write_record(&header)?;
    let m = &table.matrix;
    for i in 0..m.rows() {
        let mut rec: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        if let Some(y) = m.response() {
            rec.push(y[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Default column names `x1, …, xp` for generated data.
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}
