//! Delimited-text parsing into datasets. The first line is a header;
//! fields are separated by commas when the header contains one, otherwise
//! by whitespace. Columns whose every cell parses as a number become
//! numeric; anything else stays text.

use std::path::Path;

use crate::data::{Dataset, FeatureColumn, Response};
use crate::error::{GroveError, Result};

/// A parsed table: column names plus typed columns, all of equal length.
#[derive(Debug, Clone)]
pub struct ParsedTable {
    names: Vec<String>,
    columns: Vec<ParsedColumn>,
    n_rows: usize,
}

#[derive(Debug, Clone)]
pub enum ParsedColumn {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

impl ParsedTable {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, index: usize) -> &ParsedColumn {
        &self.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Option<(usize, &ParsedColumn)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (i, &self.columns[i]))
    }
}

/// Parse delimited text. Line numbers in errors are 1-based and count the
/// header as line 1.
pub fn parse_dataset_str(text: &str) -> Result<ParsedTable> {
    let mut lines = text.lines();
    let header = lines.next().filter(|l| !l.trim().is_empty()).ok_or_else(|| {
        GroveError::Parse {
            line: 1,
            message: "file is empty".into(),
        }
    })?;
    let comma = header.contains(',');
    let split = |line: &str| -> Vec<String> {
        if comma {
            line.split(',').map(|f| f.trim().to_string()).collect()
        } else {
            line.split_whitespace().map(String::from).collect()
        }
    };

    let names = split(header);
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(GroveError::Parse {
                line: 1,
                message: format!("column {} has an empty name", i + 1),
            });
        }
        if names[..i].contains(name) {
            return Err(GroveError::Parse {
                line: 1,
                message: format!("duplicate column name \"{name}\""),
            });
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    let mut n_rows = 0usize;
    for (i, line) in lines.enumerate() {
        let line_number = i + 2;
        let fields = split(line);
        if fields.len() != names.len() {
            return Err(GroveError::Parse {
                line: line_number,
                message: format!(
                    "row has {} field(s), header has {}",
                    fields.len(),
                    names.len()
                ),
            });
        }
        for (column, field) in cells.iter_mut().zip(fields) {
            column.push(field);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(GroveError::Parse {
            line: 1,
            message: "no data rows after the header".into(),
        });
    }

    let columns = cells
        .into_iter()
        .map(|raw| {
            let parsed: Option<Vec<f64>> = raw.iter().map(|c| c.parse::<f64>().ok()).collect();
            match parsed {
                Some(numbers) => ParsedColumn::Numeric(numbers),
                None => ParsedColumn::Text(raw),
            }
        })
        .collect();
    Ok(ParsedTable {
        names,
        columns,
        n_rows,
    })
}

pub fn parse_dataset_file(path: &Path) -> Result<ParsedTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GroveError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_dataset_str(&text)
}

/// Which columns hold the response.
#[derive(Debug, Clone)]
pub enum ResponseSpec<'a> {
    Classification { target: &'a str },
    Regression { target: &'a str },
    Survival { time: &'a str, status: &'a str },
}

fn require_column<'t>(table: &'t ParsedTable, name: &str) -> Result<(usize, &'t ParsedColumn)> {
    table
        .column_by_name(name)
        .ok_or_else(|| GroveError::Schema(format!("column \"{name}\" not found in the data")))
}

fn numeric_column<'t>(table: &'t ParsedTable, name: &str) -> Result<(usize, &'t [f64])> {
    let (index, column) = require_column(table, name)?;
    match column {
        ParsedColumn::Numeric(values) => Ok((index, values)),
        ParsedColumn::Text(_) => Err(GroveError::Data(format!(
            "column \"{name}\" must be numeric"
        ))),
    }
}

/// Assemble a dataset from a parsed table: the response columns named in
/// `spec` plus every remaining column, in table order, as dense features.
pub fn build_dataset(table: &ParsedTable, spec: &ResponseSpec) -> Result<Dataset> {
    let (response, used): (Response, Vec<usize>) = match spec {
        ResponseSpec::Classification { target } => {
            let (index, column) = require_column(table, target)?;
            let raw: Vec<String> = match column {
                ParsedColumn::Text(cells) => cells.clone(),
                ParsedColumn::Numeric(values) => {
                    values.iter().map(|v| format!("{v}")).collect()
                }
            };
            (Response::from_labels(&raw)?, vec![index])
        }
        ResponseSpec::Regression { target } => {
            let (index, values) = numeric_column(table, target)?;
            (
                Response::Regression {
                    values: values.to_vec(),
                },
                vec![index],
            )
        }
        ResponseSpec::Survival { time, status } => {
            let (time_index, times) = numeric_column(table, time)?;
            let (status_index, raw_statuses) = numeric_column(table, status)?;
            let mut statuses = Vec::with_capacity(raw_statuses.len());
            for (row, &s) in raw_statuses.iter().enumerate() {
                if s == 0.0 {
                    statuses.push(0u8);
                } else if s == 1.0 {
                    statuses.push(1u8);
                } else {
                    return Err(GroveError::Data(format!(
                        "status column \"{status}\" must contain only 0 and 1 (row {}, value {s})",
                        row + 1
                    )));
                }
            }
            (
                Response::Survival {
                    times: times.to_vec(),
                    statuses,
                },
                vec![time_index, status_index],
            )
        }
    };

    let mut features = Vec::new();
    for index in 0..table.n_columns() {
        if used.contains(&index) {
            continue;
        }
        let name = &table.names()[index];
        match table.column(index) {
            ParsedColumn::Numeric(values) => {
                features.push(FeatureColumn::dense(name.clone(), values.clone()));
            }
            ParsedColumn::Text(_) => {
                return Err(GroveError::Data(format!(
                    "feature column \"{name}\" is not numeric"
                )));
            }
        }
    }
    Dataset::new(features, response)
}
