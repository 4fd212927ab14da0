//! Labeled numeric CSV grids (score matrices, ANOVA input).
//!
//! Layout: a header row whose first cell names the row-label column and
//! whose remaining cells are column labels, then one row per label. `#`
//! starts a comment line.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid has no header row")]
    Empty,
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: `{value}` is not a number")]
    NotNumeric { line: usize, value: String },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledGrid {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl LabeledGrid {
    /// Keeps only the named rows, in the given order.
    pub fn select_rows(&self, labels: &[&str]) -> Option<LabeledGrid> {
        let mut values = Vec::with_capacity(labels.len());
        for l in labels {
            let i = self.row_labels.iter().position(|r| r == l)?;
            values.push(self.values[i].clone());
        }
        Some(LabeledGrid {
            row_labels: labels.iter().map(|s| s.to_string()).collect(),
            col_labels: self.col_labels.clone(),
            values,
        })
    }

    pub fn transpose(&self) -> LabeledGrid {
        let values = (0..self.col_labels.len())
            .map(|j| self.values.iter().map(|row| row[j]).collect())
            .collect();
        LabeledGrid {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            values,
        }
    }
}

pub fn parse_grid_csv(source: &str) -> Result<LabeledGrid, GridError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut row_labels = Vec::new();
    let mut values = Vec::new();
    for result in reader.records() {
        let rec = result.map_err(|e| GridError::Csv(e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let Some(h) = &header else {
            header = Some(rec.iter().map(String::from).collect());
            continue;
        };
        if rec.len() != h.len() {
            return Err(GridError::Ragged {
                line,
                expected: h.len(),
                found: rec.len(),
            });
        }
        row_labels.push(rec[0].to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| GridError::NotNumeric {
                    line,
                    value: cell.to_string(),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        values.push(row);
    }
    let header = header.ok_or(GridError::Empty)?;
    Ok(LabeledGrid {
        row_labels,
        col_labels: header.into_iter().skip(1).collect(),
        values,
    })
}
