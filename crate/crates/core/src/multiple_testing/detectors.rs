use crate::conformal::CalibrationSet;
use crate::error::{Error, Result};
use crate::score_matrix::ScoreMatrix;

use super::{
    bh_thresholds, bonferroni_threshold, calibrate_naive_thresholds, DetectionResult,
    DetectorConfig, Method,
};

fn check_len(p_values: &[f64], cfg: &DetectorConfig) -> Result<()> {
    if p_values.len() != cfg.k {
        return Err(Error::config(format!(
            "{} p-values for a detector configured with K = {}",
            p_values.len(),
            cfg.k
        )));
    }
    if let Some(i) = p_values.iter().position(|p| p.is_nan()) {
        return Err(Error::Validation(format!("NaN p-value at index {i}")));
    }
    Ok(())
}

/// Indices ordered by ascending p-value, ties by original index.
fn ascending_order(p_values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p_values.len()).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    order
}

/// BH-style test: `m = max{i : Q_(i) <= α i / (C(K) K)}`, OOD iff `m >= 1`.
///
/// The rejected set is the `m` smallest p-values (original indices).
pub fn bh_detect(p_values: &[f64], cfg: &DetectorConfig) -> Result<DetectionResult> {
    check_len(p_values, cfg)?;
    let thresholds = bh_thresholds(cfg.alpha.get(), cfg.epsilon, cfg.k);
    let order = ascending_order(p_values);
    let sorted: Vec<f64> = order.iter().map(|&i| p_values[i]).collect();
    let m = sorted
        .iter()
        .zip(&thresholds)
        .rposition(|(p, t)| p <= t)
        .map_or(0, |pos| pos + 1);
    Ok(DetectionResult {
        is_ood: m >= 1,
        p_values: p_values.to_vec(),
        sorted_p_values: sorted,
        m,
        rejected_indices: order[..m].to_vec(),
        thresholds,
    })
}

/// Bonferroni-style test: `m = |{i : Q_i <= α / ((1 + ε) K)}|`.
pub fn bonferroni_detect(p_values: &[f64], cfg: &DetectorConfig) -> Result<DetectionResult> {
    check_len(p_values, cfg)?;
    let t = bonferroni_threshold(cfg.alpha.get(), cfg.epsilon, cfg.k);
    let order = ascending_order(p_values);
    let sorted: Vec<f64> = order.iter().map(|&i| p_values[i]).collect();
    let rejected: Vec<usize> = order.into_iter().filter(|&i| p_values[i] <= t).collect();
    Ok(DetectionResult {
        is_ood: !rejected.is_empty(),
        p_values: p_values.to_vec(),
        sorted_p_values: sorted,
        m: rejected.len(),
        rejected_indices: rejected,
        thresholds: vec![t; cfg.k],
    })
}

/// Naive averaging rule: `γ_i = 1{T_i >= τ_i}`, OOD iff `mean(γ) >= 1/2`.
pub fn naive_average_detect(scores: &[f64], taus: &[f64]) -> Result<DetectionResult> {
    if scores.is_empty() || scores.len() != taus.len() {
        return Err(Error::config(format!(
            "{} scores for {} thresholds",
            scores.len(),
            taus.len()
        )));
    }
    let rejected: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i] >= taus[i])
        .collect();
    let m = rejected.len();
    // γ >= 1/2  <=>  2m >= K, kept in integers so K = 2 with one hit is exact
    let is_ood = 2 * m >= scores.len();
    Ok(DetectionResult {
        is_ood,
        p_values: Vec::new(),
        sorted_p_values: Vec::new(),
        m,
        rejected_indices: rejected,
        thresholds: taus.to_vec(),
    })
}

/// A detector ready to score test samples: conformal p-values against a
/// calibration set followed by the configured multiple test, or the naive
/// averaging rule with thresholds set on the calibration rows.
#[derive(Debug, Clone)]
pub struct OodDetector {
    cfg: DetectorConfig,
    cal: CalibrationSet,
    taus: Option<Vec<f64>>,
}

impl OodDetector {
    pub fn new(cal: CalibrationSet, cfg: DetectorConfig) -> Result<Self> {
        if cal.k() != cfg.k {
            return Err(Error::config(format!(
                "calibration set has {} scores, detector configured for K = {}",
                cal.k(),
                cfg.k
            )));
        }
        let taus = match cfg.method {
            Method::NaiveAverage => {
                let rows: Vec<Vec<f64>> = (0..cal.n_cal())
                    .map(|r| (0..cal.k()).map(|i| cal.column(i)[r]).collect())
                    .collect();
                let holdout = ScoreMatrix::new(cal.names().to_vec(), rows)?;
                Some(calibrate_naive_thresholds(&holdout, cfg.alpha.get())?)
            }
            _ => None,
        };
        Ok(Self { cfg, cal, taus })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn calibration(&self) -> &CalibrationSet {
        &self.cal
    }

    /// Thresholds of the naive rule, when that method is configured.
    pub fn naive_thresholds(&self) -> Option<&[f64]> {
        self.taus.as_deref()
    }

    pub fn detect(&self, test_scores: &[f64]) -> Result<DetectionResult> {
        match self.cfg.method {
            Method::Bh => bh_detect(&self.cal.p_values(test_scores)?, &self.cfg),
            Method::Bonferroni => bonferroni_detect(&self.cal.p_values(test_scores)?, &self.cfg),
            Method::NaiveAverage => {
                let taus = self.taus.as_deref().expect("naive thresholds set in new()");
                naive_average_detect(test_scores, taus)
            }
        }
    }

    /// Decision only, skipping the bookkeeping of [`DetectionResult`].
    pub fn is_ood(&self, test_scores: &[f64]) -> bool {
        match self.cfg.method {
            Method::NaiveAverage => {
                let taus = self.taus.as_deref().expect("naive thresholds set in new()");
                let hits = test_scores.iter().zip(taus).filter(|(s, t)| s >= t).count();
                2 * hits >= taus.len()
            }
            Method::Bh => {
                let mut p: Vec<f64> = test_scores
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| self.cal.p_value(i, t))
                    .collect();
                p.sort_by(f64::total_cmp);
                let th = bh_thresholds(self.cfg.alpha.get(), self.cfg.epsilon, self.cfg.k);
                p.iter().zip(&th).any(|(p, t)| p <= t)
            }
            Method::Bonferroni => {
                let t = bonferroni_threshold(self.cfg.alpha.get(), self.cfg.epsilon, self.cfg.k);
                test_scores
                    .iter()
                    .enumerate()
                    .any(|(i, &s)| self.cal.p_value(i, s) <= t)
            }
        }
    }
}
