use crate::error::{Error, Result};
use crate::score_matrix::ScoreMatrix;

const MIN_HOLDOUT_ROWS: usize = 100;

/// Thresholds `τ_1..τ_K` for the naive averaging rule.
///
/// All scores share one exceedance level `q = k / n`: `τ_i` is the `k`-th
/// largest holdout value of score `i`. The holdout false-alarm rate of the
/// rule is non-decreasing in `k`, so bisection over `k` finds the largest
/// level whose false-alarm rate does not exceed `target_pf`.
pub fn calibrate_naive_thresholds(holdout: &ScoreMatrix, target_pf: f64) -> Result<Vec<f64>> {
    let n = holdout.n_rows();
    if n < MIN_HOLDOUT_ROWS {
        return Err(Error::Calibration(format!(
            "naive thresholds need at least {MIN_HOLDOUT_ROWS} holdout rows, got {n}"
        )));
    }
    if !(target_pf > 0.0 && target_pf < 1.0) {
        return Err(Error::Calibration(format!(
            "target false alarm {target_pf} is not reachable with finite data"
        )));
    }
    let descending: Vec<Vec<f64>> = holdout
        .columns()
        .into_iter()
        .map(|mut c| {
            c.sort_by(|a, b| b.total_cmp(a));
            c
        })
        .collect();
    let taus_at = |k: usize| -> Vec<f64> { descending.iter().map(|c| c[k - 1]).collect() };
    let false_alarm = |taus: &[f64]| -> f64 {
        let flagged = holdout
            .rows()
            .iter()
            .filter(|row| {
                let hits = row.iter().zip(taus).filter(|(s, t)| s >= t).count();
                2 * hits >= taus.len()
            })
            .count();
        flagged as f64 / n as f64
    };

    if false_alarm(&taus_at(1)) > target_pf {
        return Err(Error::Calibration(format!(
            "even the most extreme thresholds give a holdout false alarm above {target_pf}"
        )));
    }
    // invariant: fa(lo) <= target, fa(hi) > target (or hi = n + 1)
    let (mut lo, mut hi) = (1usize, n + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if false_alarm(&taus_at(mid)) <= target_pf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(taus_at(lo))
}
