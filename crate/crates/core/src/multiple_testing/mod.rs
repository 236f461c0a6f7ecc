//! Combining `K` per-score p-values into a single OOD decision.
//!
//! Under the global null (an in-distribution input) every per-score
//! hypothesis is true, so the false-alarm probability of a detector equals
//! its family-wise error rate. The BH-style test uses the dependence-robust
//! ladder `α i / (C(K) K)` with `C(K) = (1 + ε) Σ_{j≤K} 1/j`; the extra
//! `(1 + ε)` factor buys conditional (per calibration set) control once the
//! calibration set is large enough, see [`cal_size`].

pub mod cal_size;
mod detectors;
mod naive;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Probability;

pub use cal_size::{
    bh_condition, bonferroni_condition, required_cal_size, required_cal_size_bonferroni,
    CalSizeRequest, ConditionCheck, Rung,
};
pub use detectors::{bh_detect, bonferroni_detect, naive_average_detect, OodDetector};
pub use naive::calibrate_naive_thresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bh,
    Bonferroni,
    #[serde(alias = "naive")]
    NaiveAverage,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bh => "bh",
            Method::Bonferroni => "bonferroni",
            Method::NaiveAverage => "naive",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bh" => Ok(Method::Bh),
            "bonferroni" => Ok(Method::Bonferroni),
            "naive" | "naive_average" | "naive-average" => Ok(Method::NaiveAverage),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

/// Detector parameters: target conditional false alarm `alpha`, slack
/// `epsilon`, guarantee failure probability `delta` and number of scores `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub alpha: Probability,
    pub epsilon: f64,
    pub delta: Probability,
    pub k: usize,
    pub method: Method,
}

impl DetectorConfig {
    pub fn new(alpha: f64, epsilon: f64, delta: f64, k: usize, method: Method) -> Result<Self> {
        let alpha = Probability::open(alpha)
            .map_err(|_| Error::config(format!("alpha must lie in (0, 1), got {alpha}")))?;
        let delta = Probability::open(delta)
            .map_err(|_| Error::config(format!("delta must lie in (0, 1), got {delta}")))?;
        if epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::config(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if k == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        Ok(Self {
            alpha,
            epsilon,
            delta,
            k,
            method,
        })
    }

    pub fn bh(alpha: f64, epsilon: f64, delta: f64, k: usize) -> Result<Self> {
        Self::new(alpha, epsilon, delta, k, Method::Bh)
    }

    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    /// Per-rank rejection thresholds for the configured method.
    pub fn thresholds(&self) -> Vec<f64> {
        match self.method {
            Method::Bh => bh_thresholds(self.alpha.get(), self.epsilon, self.k),
            Method::Bonferroni => {
                vec![bonferroni_threshold(self.alpha.get(), self.epsilon, self.k); self.k]
            }
            Method::NaiveAverage => Vec::new(),
        }
    }
}

/// Outcome of one detector evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub is_ood: bool,
    pub p_values: Vec<f64>,
    pub sorted_p_values: Vec<f64>,
    pub m: usize,
    pub rejected_indices: Vec<usize>,
    pub thresholds: Vec<f64>,
}

/// `C(K) = (1 + ε) Σ_{j=1..K} 1/j`.
pub fn correction_constant(k: usize, epsilon: f64) -> f64 {
    (1.0 + epsilon) * harmonic(k)
}

pub(crate) fn harmonic(k: usize) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

/// Rung `j` (1-based) of the BH ladder, `α j / (C(K) K)`.
pub fn bh_level(alpha: f64, epsilon: f64, k: usize, j: usize) -> f64 {
    alpha * j as f64 / (correction_constant(k, epsilon) * k as f64)
}

pub fn bh_thresholds(alpha: f64, epsilon: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|j| bh_level(alpha, epsilon, k, j)).collect()
}

/// `α / ((1 + ε) K)`.
pub fn bonferroni_threshold(alpha: f64, epsilon: f64, k: usize) -> f64 {
    alpha / ((1.0 + epsilon) * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correction_constant_values() {
        assert_eq!(correction_constant(1, 0.0), 1.0);
        assert!((correction_constant(3, 1.0) - 11.0 / 3.0).abs() < 1e-15);
        assert!((correction_constant(3, 0.0) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn ladder_is_increasing_and_tops_out_below_alpha() {
        for k in 1..=12 {
            for eps in [0.0, 0.5, 1.0] {
                let t = bh_thresholds(0.1, eps, k);
                assert!(t.windows(2).all(|w| w[0] < w[1]));
                let top = 0.1 / correction_constant(k, eps);
                assert!((t[k - 1] - top).abs() < 1e-15);
                if k > 1 || eps > 0.0 {
                    assert!(t[k - 1] < 0.1);
                }
            }
        }
    }

    #[test]
    fn single_score_thresholds_coincide() {
        for eps in [0.0, 0.3, 1.0] {
            let bh = bh_thresholds(0.2, eps, 1)[0];
            assert!((bh - bonferroni_threshold(0.2, eps, 1)).abs() < 1e-17);
        }
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::bh(0.0, 1.0, 0.1, 3).is_err());
        assert!(DetectorConfig::bh(1.0, 1.0, 0.1, 3).is_err());
        assert!(DetectorConfig::bh(0.1, -0.5, 0.1, 3).is_err());
        assert!(DetectorConfig::bh(0.1, 1.0, 1.0, 3).is_err());
        assert!(DetectorConfig::bh(0.1, 1.0, 0.1, 0).is_err());
        assert!(DetectorConfig::bh(0.1, 0.0, 0.1, 1).is_ok());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("BH".parse::<Method>().unwrap(), Method::Bh);
        assert_eq!("naive".parse::<Method>().unwrap(), Method::NaiveAverage);
        assert!("holm".parse::<Method>().is_err());
    }
}
