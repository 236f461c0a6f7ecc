//! Conformal p-values from a calibration set, and exact p-values from a known
//! null distribution.
//!
//! The conformal p-value of a test score `t` against calibration scores
//! `c_1..c_n` is `(1 + #{j : c_j >= t}) / (1 + n)`. Ties count toward the
//! exceedance set, which can only make the p-value larger.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::normal_sf;

/// `K` calibration score columns of a common length `n_cal`.
///
/// Each column is kept sorted ascending alongside the original order, so
/// exceedance counts can be answered by binary search. The linear-scan and
/// sorted paths return identical counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    sorted: Vec<Vec<f64>>,
}

impl CalibrationSet {
    /// Builds a calibration set from score columns.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::config(
                "calibration set needs at least one score column",
            ));
        }
        if names.len() != columns.len() {
            return Err(Error::config(format!(
                "{} score names for {} calibration columns",
                names.len(),
                columns.len()
            )));
        }
        let n_cal = columns[0].len();
        if n_cal == 0 {
            return Err(Error::config("calibration columns are empty"));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_cal {
                return Err(Error::config(format!(
                    "calibration column '{name}' has {} entries, expected {n_cal}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| v.is_nan()) {
                return Err(Error::Validation(format!(
                    "NaN calibration score in column '{name}' at row {row}"
                )));
            }
        }
        let sorted = columns
            .iter()
            .map(|c| {
                let mut s = c.clone();
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();
        Ok(Self {
            names,
            columns,
            sorted,
        })
    }

    /// Same as [`CalibrationSet::new`] with generated names `s0, s1, ...`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..columns.len()).map(|i| format!("s{i}")).collect();
        Self::new(names, columns)
    }

    /// Builds from row-major samples (`rows[sample][score]`).
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let k = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); k];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::config(format!(
                    "calibration row {r} has {} scores, expected {k}",
                    row.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn n_cal(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    /// Column `i` sorted ascending.
    pub fn sorted_column(&self, i: usize) -> &[f64] {
        &self.sorted[i]
    }

    /// `#{j : cal[i][j] >= t}` by binary search over the sorted column.
    pub fn exceedances(&self, i: usize, t: f64) -> usize {
        count_at_least_sorted(&self.sorted[i], t)
    }

    /// Conformal p-value of `t` against column `i`.
    pub fn p_value(&self, i: usize, t: f64) -> f64 {
        (1 + self.exceedances(i, t)) as f64 / (1 + self.n_cal()) as f64
    }

    /// Conformal p-values of one test sample, column `i` against calibration
    /// column `i`.
    pub fn p_values(&self, test_scores: &[f64]) -> Result<Vec<f64>> {
        self.check_test_row(test_scores)?;
        Ok(test_scores
            .iter()
            .enumerate()
            .map(|(i, &t)| self.p_value(i, t))
            .collect())
    }

    fn check_test_row(&self, test_scores: &[f64]) -> Result<()> {
        if test_scores.len() != self.k() {
            return Err(Error::config(format!(
                "test sample has {} scores, calibration set has {}",
                test_scores.len(),
                self.k()
            )));
        }
        if let Some(i) = test_scores.iter().position(|t| t.is_nan()) {
            return Err(Error::Validation(format!("NaN test score in column {i}")));
        }
        Ok(())
    }
}

fn count_at_least_sorted(sorted: &[f64], t: f64) -> usize {
    sorted.len() - sorted.partition_point(|&c| c < t)
}

/// `(1 + #{j : cal[j] >= t}) / (1 + n_cal)` by a single linear pass.
pub fn conformal_p_value(cal_scores: &[f64], t_test: f64) -> Result<f64> {
    if cal_scores.is_empty() {
        return Err(Error::config("empty calibration vector"));
    }
    let count = cal_scores.iter().filter(|&&c| c >= t_test).count();
    Ok((1 + count) as f64 / (1 + cal_scores.len()) as f64)
}

/// Component-wise conformal p-values; column `i` uses calibration column `i`.
pub fn conformal_p_values(cal: &CalibrationSet, test_scores: &[f64]) -> Result<Vec<f64>> {
    cal.check_test_row(test_scores)?;
    test_scores
        .iter()
        .enumerate()
        .map(|(i, &t)| conformal_p_value(cal.column(i), t))
        .collect()
}

/// Exact probability that a fresh null score yields a conformal p-value at or
/// below `level`, given one sorted calibration column.
///
/// With `a = floor((n + 1) * level)`, `Q <= level` happens exactly when fewer
/// than `a` calibration scores are `>= t`, i.e. when `t` exceeds the
/// `(n - a + 1)`-th order statistic. For a continuous null with survival
/// function `sf` the conditional probability is `sf(X_(n-a+1))`, which over
/// random calibration draws is Beta(a, n + 1 - a) distributed.
pub fn conditional_exceedance_probability<F: Fn(f64) -> f64>(
    sorted_cal: &[f64],
    level: f64,
    sf: F,
) -> f64 {
    let n = sorted_cal.len();
    let a = ((n + 1) as f64 * level).floor();
    if a < 1.0 {
        return 0.0;
    }
    let a = a as usize;
    if a > n {
        return 1.0;
    }
    // 1-based order statistic n - a + 1 sits at 0-based index n - a
    sf(sorted_cal[n - a])
}

/// Analytic null distributions for exact p-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NullCdf {
    StandardNormal,
    Normal { mean: f64, sd: f64 },
}

impl NullCdf {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if sd <= 0.0 || !mean.is_finite() || !sd.is_finite() {
            return Err(Error::config(format!(
                "invalid normal null N({mean}, {sd}^2)"
            )));
        }
        Ok(NullCdf::Normal { mean, sd })
    }

    /// `P(T >= t)` under the null.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            NullCdf::StandardNormal => normal_sf(t),
            NullCdf::Normal { mean, sd } => normal_sf((t - mean) / sd),
        }
    }
}

impl FromStr for NullCdf {
    type Err = Error;

    /// Accepts `std_normal` or `normal(mean,sd)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "std_normal" || s == "standard_normal" {
            return Ok(NullCdf::StandardNormal);
        }
        if let Some(inner) = s.strip_prefix("normal(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if let [m, sd] = parts.as_slice() {
                let m: f64 = m
                    .parse()
                    .map_err(|_| Error::config(format!("bad mean in '{s}'")))?;
                let sd: f64 = sd
                    .parse()
                    .map_err(|_| Error::config(format!("bad sd in '{s}'")))?;
                return NullCdf::normal(m, sd);
            }
        }
        Err(Error::config(format!(
            "unsupported null distribution '{s}'"
        )))
    }
}

/// Exact p-value `1 - F(t)` under a known null.
pub fn oracle_p_value(null_cdf: &NullCdf, t_test: f64) -> f64 {
    null_cdf.survival(t_test)
}
