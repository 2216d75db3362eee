use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{CovariateKind, CovariateSchema, Dataset};
use crate::error::{Error, Result};

/// Reads a dataset from a headed, comma-separated file.
pub fn load_csv(
    path: &Path,
    schema: &CovariateSchema,
    outcome_col: &str,
    treatment_col: &str,
) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, schema, outcome_col, treatment_col)
}

/// Like [`load_csv`] but from any reader; `label` names the source in errors.
pub fn read_csv<R: Read>(
    reader: R,
    label: &Path,
    schema: &CovariateSchema,
    outcome_col: &str,
    treatment_col: &str,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: label.to_path_buf(),
                column: name.to_string(),
            })
    };
    let var_cols: Vec<usize> = schema
        .entries()
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<_>>()?;
    let y_col = find(outcome_col)?;
    let d_col = find(treatment_col)?;

    let width = schema.width();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width];
    let mut y = Vec::new();
    let mut d = Vec::new();
    let cell_err = |line: u64, column: &str, message: String| Error::Cell {
        path: label.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    };

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |idx: usize, name: &str| -> Result<&str> {
            record
                .get(idx)
                .map(str::trim)
                .ok_or_else(|| cell_err(line, name, "missing cell".into()))
        };
        let mut col = 0;
        for (c, &src) in schema.entries().iter().zip(&var_cols) {
            let cell = get(src, &c.name)?;
            for v in encode_cell(&c.kind, cell).map_err(|m| cell_err(line, &c.name, m))? {
                columns[col].push(v);
                col += 1;
            }
        }
        y.push(parse_number(get(y_col, outcome_col)?).map_err(|m| cell_err(line, outcome_col, m))?);
        d.push(match get(d_col, treatment_col)? {
            "1" => true,
            "0" => false,
            other => {
                return Err(cell_err(
                    line,
                    treatment_col,
                    format!("treatment must be 0 or 1, found '{other}'"),
                ))
            }
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyFile(PathBuf::from(label)));
    }
    Dataset::from_columns(schema.clone(), columns, y, d)
}

/// Reads only the schema's covariate columns, expanded, one vector per row.
pub fn read_covariate_rows<R: Read>(
    reader: R,
    label: &Path,
    schema: &CovariateSchema,
) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = schema
        .entries()
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == c.name)
                .ok_or_else(|| Error::MissingColumn {
                    path: label.to_path_buf(),
                    column: c.name.clone(),
                })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut row = Vec::with_capacity(schema.width());
        for (c, &src) in schema.entries().iter().zip(&cols) {
            let cell = record.get(src).map(str::trim).unwrap_or("");
            row.extend(encode_cell(&c.kind, cell).map_err(|message| Error::Cell {
                path: label.to_path_buf(),
                line,
                column: c.name.clone(),
                message,
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(label.to_path_buf()));
    }
    Ok(rows)
}

/// Encodes one cell: a number for a continuous covariate, the indicator
/// block for a categorical one.
pub(crate) fn encode_cell(kind: &CovariateKind, cell: &str) -> std::result::Result<Vec<f64>, String> {
    match kind {
        CovariateKind::Continuous => Ok(vec![parse_number(cell)?]),
        CovariateKind::Categorical { levels } => {
            let hit = levels
                .iter()
                .position(|l| l == cell)
                .ok_or_else(|| format!("unknown level '{cell}'"))?;
            Ok((0..levels.len()).map(|k| if k == hit { 1.0 } else { 0.0 }).collect())
        }
    }
}

pub(crate) fn parse_number(cell: &str) -> std::result::Result<f64, String> {
    if cell.is_empty() {
        return Err("missing value".into());
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("non-finite value '{cell}'")),
        Err(_) => Err(format!("cannot parse '{cell}' as a number")),
    }
}

/// Writes the dataset with categorical columns collapsed back to level
/// names. Numbers use the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(
    data: &Dataset,
    writer: W,
    outcome_col: &str,
    treatment_col: &str,
) -> Result<()> {
    let schema = data.schema();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.entries().iter().map(|c| c.name.as_str()).collect();
    header.push(outcome_col);
    header.push(treatment_col);
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = Vec::with_capacity(header.len());
        for (var, c) in schema.entries().iter().enumerate() {
            let cols = schema.columns_of(var);
            match &c.kind {
                CovariateKind::Continuous => rec.push(data.x(i, cols.start).to_string()),
                CovariateKind::Categorical { levels } => {
                    let k = cols.clone().position(|j| data.x(i, j) == 1.0).unwrap_or(0);
                    rec.push(levels[k].clone());
                }
            }
        }
        rec.push(data.y()[i].to_string());
        rec.push(if data.d()[i] { "1" } else { "0" }.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
