//! Detection power at a fixed false-alarm level, AUROC and family-wise
//! error rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiple_testing::OodDetector;
use crate::score_matrix::ScoreMatrix;

/// Detection power and the false-alarm rate actually observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAtFalseAlarm {
    pub target_pf: f64,
    pub pd: f64,
    pub achieved_pf: f64,
}

fn mean_true(decisions: &[bool]) -> f64 {
    decisions.iter().filter(|&&d| d).count() as f64 / decisions.len() as f64
}

/// `pd = mean(ood_decisions)`, `achieved_pf = mean(in_decisions)`.
///
/// The detector is expected to have been configured for `target_pf`
/// beforehand; nothing is re-thresholded here.
pub fn power_at_false_alarm(
    in_decisions: &[bool],
    ood_decisions: &[bool],
    target_pf: f64,
) -> Result<PowerAtFalseAlarm> {
    if in_decisions.is_empty() || ood_decisions.is_empty() {
        return Err(Error::Validation(
            "power at false alarm needs decisions on both sides".into(),
        ));
    }
    Ok(PowerAtFalseAlarm {
        target_pf,
        pd: mean_true(ood_decisions),
        achieved_pf: mean_true(in_decisions),
    })
}

/// Twice the Mann-Whitney U statistic: each (in, ood) pair counts 2 when the
/// OOD score is larger and 1 when tied.
pub fn doubled_mann_whitney(in_scores: &[f64], ood_scores: &[f64]) -> u128 {
    let mut sorted = in_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    ood_scores
        .iter()
        .map(|s| {
            let below = sorted.partition_point(|x| x.total_cmp(s).is_lt());
            let not_above = sorted.partition_point(|x| x.total_cmp(s).is_le());
            (2 * below + (not_above - below)) as u128
        })
        .sum()
}

/// Area under the ROC curve for scores oriented larger = more OOD, computed
/// exactly as `U / (n_in n_ood)` with ties counted one half.
///
/// `auroc(a, b) + auroc(b, a)` is exactly 1.0 in floating point: the side
/// above one half is computed as one minus the other side's value.
pub fn auroc(in_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    if in_scores.is_empty() || ood_scores.is_empty() {
        return Err(Error::Validation("AUROC needs scores on both sides".into()));
    }
    if in_scores.iter().chain(ood_scores).any(|s| s.is_nan()) {
        return Err(Error::Validation("AUROC input contains NaN".into()));
    }
    let u2 = doubled_mann_whitney(in_scores, ood_scores);
    let total = 2 * in_scores.len() as u128 * ood_scores.len() as u128;
    let rest = total - u2;
    Ok(if u2 <= rest {
        u2 as f64 / total as f64
    } else {
        1.0 - rest as f64 / total as f64
    })
}

/// Fraction of trials with at least one rejection. Under the global null
/// this is both the FWER and the FDR. An empty matrix gives 0.
pub fn empirical_fwer<R: AsRef<[bool]>>(decision_matrix: &[R]) -> f64 {
    if decision_matrix.is_empty() {
        return 0.0;
    }
    let hits = decision_matrix
        .iter()
        .filter(|row| row.as_ref().iter().any(|&r| r))
        .count();
    hits as f64 / decision_matrix.len() as f64
}

/// AUROC of a single named score column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreAuroc {
    pub name: String,
    pub auroc: f64,
}

/// Metrics of a configured detector on labeled in-distribution and OOD
/// score matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_in: usize,
    pub n_ood: usize,
    pub power: PowerAtFalseAlarm,
    pub per_score_auroc: Vec<ScoreAuroc>,
}

pub fn evaluate_detector(
    detector: &OodDetector,
    in_dist: &ScoreMatrix,
    ood: &ScoreMatrix,
) -> Result<EvaluationReport> {
    let names = detector.calibration().names();
    for (which, m) in [("in-distribution", in_dist), ("OOD", ood)] {
        if m.names() != names {
            return Err(Error::ShapeMismatch(format!(
                "{which} columns {:?} differ from calibration columns {names:?}",
                m.names()
            )));
        }
    }
    let decide =
        |m: &ScoreMatrix| -> Vec<bool> { m.rows().iter().map(|r| detector.is_ood(r)).collect() };
    let power = power_at_false_alarm(
        &decide(in_dist),
        &decide(ood),
        detector.config().alpha.get(),
    )?;
    let per_score_auroc = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            Ok(ScoreAuroc {
                name: name.clone(),
                auroc: auroc(&in_dist.column(i), &ood.column(i))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        n_in: in_dist.n_rows(),
        n_ood: ood.n_rows(),
        power,
        per_score_auroc,
    })
}
