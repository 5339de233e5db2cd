//! Plot-ready result tables and CSV emission.
//!
//! Values go out in scientific notation with 13 significant digits so a
//! round-trip through text stays within 1e-12 relative. Failure rows in
//! sweeps carry NaN cells plus a zero flag column rather than aborting the
//! file.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Rectangular numeric table with named columns (`name_unit` style headers).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// Errors from table construction and I/O.
#[derive(Debug, Error)]
pub enum TableError {
    #[error("row has {got} cells, table has {expected} columns")]
    NotRectangular { got: usize, expected: usize },
    #[error("duplicate column name {0}")]
    DuplicateColumn(String),
    #[error("csv parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Result<Self, TableError> {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(TableError::DuplicateColumn(c.clone()));
            }
        }
        Ok(Self {
            columns,
            rows: Vec::new(),
        })
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<(), TableError> {
        if row.len() != self.columns.len() {
            return Err(TableError::NotRectangular {
                got: row.len(),
                expected: self.columns.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{v:.12e}");
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Writes the table as CSV: header row, one record per line, newline after
/// the final row.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<(), TableError> {
    std::fs::write(path, table.to_csv_string())?;
    Ok(())
}

/// Parses a CSV produced by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<ResultTable, TableError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(TableError::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let mut table = ResultTable::new(header.split(',').collect::<Vec<_>>())?;
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.parse::<f64>().map_err(|e| TableError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        table.push_row(row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_by_one_table_two_lines() {
        let mut t = ResultTable::new(vec!["v_pullin_V"]).unwrap();
        t.push_row(vec![3.5]).unwrap();
        let s = t.to_csv_string();
        assert_eq!(s.lines().count(), 2);
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn non_rectangular_refused() {
        let mut t = ResultTable::new(vec!["a", "b"]).unwrap();
        assert!(matches!(
            t.push_row(vec![1.0]),
            Err(TableError::NotRectangular { .. })
        ));
    }

    #[test]
    fn duplicate_columns_refused() {
        assert!(matches!(
            ResultTable::new(vec!["a", "a"]),
            Err(TableError::DuplicateColumn(_))
        ));
    }

    proptest! {
        #[test]
        fn csv_round_trip(values in proptest::collection::vec(-1e12f64..1e12, 1..40)) {
            let mut t = ResultTable::new(vec!["x_m", "y_m"]).unwrap();
            for chunk in values.chunks(2) {
                let a = chunk[0];
                let b = chunk.get(1).copied().unwrap_or(0.0);
                t.push_row(vec![a, b]).unwrap();
            }
            let parsed = parse_csv(&t.to_csv_string()).unwrap();
            prop_assert_eq!(parsed.columns(), t.columns());
            for (ra, rb) in parsed.rows().iter().zip(t.rows()) {
                for (a, b) in ra.iter().zip(rb) {
                    let tol = 1e-12 * b.abs().max(1e-300);
                    prop_assert!((a - b).abs() <= tol, "{} vs {}", a, b);
                }
            }
        }
    }
}
