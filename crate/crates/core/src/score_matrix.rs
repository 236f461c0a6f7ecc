use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n × K` table of scores: rows are samples, columns are score functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    names: Vec<String>,
    ids: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_ids(names, None, rows)
    }

    pub fn with_ids(
        names: Vec<String>,
        ids: Option<Vec<String>>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::config("score matrix needs at least one column"));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate score column '{name}'"
                )));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row {r} has {} values, header has {}",
                    row.len(),
                    names.len()
                )));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite score {} at row {r}, column '{}'",
                    row[c], names[c]
                )));
            }
        }
        if let Some(ids) = &ids {
            if ids.len() != rows.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} sample ids for {} rows",
                    ids.len(),
                    rows.len()
                )));
            }
        }
        Ok(Self { names, ids, rows })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|i| self.column(i)).collect()
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::config(format!("no score column named '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i]).collect())
            .collect();
        Self::with_ids(names.to_vec(), self.ids.clone(), rows)
    }
}
