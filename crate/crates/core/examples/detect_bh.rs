//! End to end: calibrate on in-distribution scores, then flag test points.

use conformal_ood::simulation::SyntheticModel;
use conformal_ood::{
    required_cal_size, CalSizeRequest, CalibrationSet, DetectorConfig, OodDetector,
};

fn main() -> conformal_ood::Result<()> {
    let k = 4;
    let cfg = DetectorConfig::bh(0.1, 1.0, 0.1, k)?;
    let n_cal = required_cal_size(&CalSizeRequest::from_config(&cfg, 1_000_000)?)?;

    // stand-ins for real detector scores, larger = more OOD
    let null = SyntheticModel::iid_normal(k, 1)?;
    let cal = null.sample_matrix(n_cal, 7)?;
    let detector = OodDetector::new(CalibrationSet::from_rows(cal.names().to_vec(), cal.rows())?, cfg)?;

    let in_dist = null.sample_matrix(5, 8)?;
    let ood = SyntheticModel::shifted(vec![0.0, 4.0, 0.0, 4.5], 2)?.sample_matrix(5, 8)?;

    println!("n_cal = {n_cal}, ladder = {:?}", cfg.thresholds());
    for (label, m) in [("in ", &in_dist), ("ood", &ood)] {
        for row in m.rows() {
            let r = detector.detect(row)?;
            let p: Vec<String> = r.p_values.iter().map(|p| format!("{p:.4}")).collect();
            println!("{label} p = [{}] m = {} ood = {}", p.join(", "), r.m, r.is_ood);
        }
    }
    Ok(())
}
