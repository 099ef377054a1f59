//! Delimited text input: header row, comma or tab separated.

use std::fs;
use std::path::Path;

use crate::CliError;

/// Numeric columns of a delimited file. Columns whose fields are all
/// non-numeric (labels, dates) are skipped and listed in `skipped`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub skipped: Vec<String>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

fn is_missing(field: &str) -> bool {
    matches!(
        field.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "n/a" | "null" | "none" | "?" | "."
    )
}

/// Tab if the header line contains one, comma otherwise.
pub fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::usage(format!("bad header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::usage("empty header row"));
    }
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(CliError::usage(format!(
                "column {} has an empty name",
                i + 1
            )));
        }
        if header[..i].contains(h) {
            return Err(CliError::usage(format!("duplicate column name '{h}'")));
        }
    }

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::usage(format!("row {}: {e}", r + 2)))?;
        for (col, field) in raw.iter_mut().zip(rec.iter()) {
            col.push(field.to_string());
        }
    }

    let mut table = Table {
        names: Vec::new(),
        columns: Vec::new(),
        skipped: Vec::new(),
    };
    for (name, fields) in header.into_iter().zip(raw) {
        let parsed: Vec<Option<f64>> = fields
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let present = fields.iter().filter(|f| !is_missing(f)).count();
        let numeric = parsed.iter().filter(|v| v.is_some()).count();
        if numeric == 0 && present > 0 {
            log::info!("skipping non-numeric column '{name}'");
            table.skipped.push(name);
            continue;
        }
        let mut values = Vec::with_capacity(fields.len());
        for (r, (field, v)) in fields.iter().zip(parsed).enumerate() {
            match v {
                Some(v) => values.push(v),
                None if is_missing(field) => {
                    return Err(CliError::usage(format!(
                        "missing value in column '{name}' at row {}",
                        r + 2
                    )))
                }
                None => {
                    return Err(CliError::usage(format!(
                        "non-numeric value {field:?} in column '{name}' at row {}",
                        r + 2
                    )))
                }
            }
        }
        table.names.push(name);
        table.columns.push(values);
    }
    Ok(table)
}
