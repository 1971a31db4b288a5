//! `SeriesTable`: named columns of finite reals, read and written as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub name: String,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        SeriesTable {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Table(format!(
                "{}: row has {} values, expected {}",
                self.name,
                row.len(),
                self.columns.len()
            )));
        }
        if let Some(i) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::Table(format!(
                "{}: non-finite value in column `{}`",
                self.name, self.columns[i]
            )));
        }
        self.rows.push(row.to_vec());
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// CSV with shortest round-trip scientific notation for every value.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, x) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{x:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_csv(name: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Table(format!("{name}: empty file")))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut table = SeriesTable {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        };
        for (lineno, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .enumerate()
                .map(|(i, s)| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::Table(format!(
                            "{name}: line {}: cannot parse `{}` in column `{}`",
                            lineno + 2,
                            s.trim(),
                            table.columns.get(i).map(String::as_str).unwrap_or("?")
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            table.push_row(&row).map_err(|e| match e {
                Error::Table(msg) => Error::Table(format!("{msg} (line {})", lineno + 2)),
                other => other,
            })?;
        }
        Ok(table)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse_csv(&name, &text)
    }

    /// Fail unless the header is exactly `expected`.
    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.columns.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::Table(format!(
                "{}: header `{}` does not match expected `{}`",
                self.name,
                self.columns.join(","),
                expected.join(",")
            )));
        }
        Ok(())
    }
}
