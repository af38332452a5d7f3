//! Reading and writing numeric panels as CSV with a header row. Missing
//! values are written as `NA`; on input an empty field or `NA` in any case
//! is missing.

use crate::error::{Error, Result};
use std::io::{Read, Write};

/// Named numeric columns, one row per time point.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Panel {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("no column named `{name}`")))
    }

    pub fn column(&self, k: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[k]).collect()
    }

    /// Sub-panel with the given columns in the given order.
    pub fn select(&self, cols: &[usize]) -> Panel {
        Panel {
            names: cols.iter().map(|&k| self.names[k].clone()).collect(),
            rows: self.rows.iter().map(|r| cols.iter().map(|&k| r[k]).collect()).collect(),
        }
    }
}

pub fn is_missing_token(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

/// Parses a panel. Row numbers in errors are 1-based file lines (the header
/// is line 1).
pub fn read_panel<R: Read>(input: R) -> Result<Panel> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let names: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Parse { row: 1, column: String::new(), message: "missing header row".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, column: String::new(), message: e.to_string() })?;
        let parsed = rec
            .iter()
            .zip(&names)
            .map(|(field, name)| {
                if is_missing_token(field) {
                    return Ok(None);
                }
                match field.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(Some(x)),
                    _ => Err(Error::Parse {
                        row,
                        column: name.clone(),
                        message: format!("`{field}` is not a finite number"),
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(parsed);
    }
    Ok(Panel { names, rows })
}

pub fn write_panel<W: Write>(panel: &Panel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&panel.names)?;
    for r in &panel.rows {
        w.write_record(r.iter().map(|x| x.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())))?;
    }
    w.flush()?;
    Ok(())
}
