//! The averaging baseline: per-score thresholds at the target false-alarm
//! rate, OOD when at least half the scores exceed theirs.

use conformal_ood::simulation::SyntheticModel;
use conformal_ood::{CalibrationSet, DetectorConfig, Method, OodDetector};

fn main() -> conformal_ood::Result<()> {
    let k = 4;
    let cfg = DetectorConfig::bh(0.1, 1.0, 0.1, k)?;
    let cal = SyntheticModel::iid_normal(k, 0)?.sample_matrix(2000, 1)?;
    let set = CalibrationSet::from_rows(cal.names().to_vec(), cal.rows())?;
    let naive = OodDetector::new(set.clone(), cfg.with_method(Method::NaiveAverage))?;
    let bh = OodDetector::new(set, cfg)?;
    println!("thresholds: {:?}", naive.naive_thresholds().unwrap());

    let null = SyntheticModel::iid_normal(k, 0)?.sample_matrix(20_000, 2)?;
    let one_score = SyntheticModel::shifted(vec![5.0, 0.0, 0.0, 0.0], 3)?.sample_matrix(20_000, 2)?;
    let rate = |d: &OodDetector, m: &conformal_ood::ScoreMatrix| {
        m.rows().iter().filter(|r| d.is_ood(r)).count() as f64 / m.n_rows() as f64
    };
    println!("false alarm: naive {:.4}, BH {:.4}", rate(&naive, &null), rate(&bh, &null));
    println!(
        "power with one shifted score: naive {:.4}, BH {:.4}",
        rate(&naive, &one_score),
        rate(&bh, &one_score)
    );
    Ok(())
}
