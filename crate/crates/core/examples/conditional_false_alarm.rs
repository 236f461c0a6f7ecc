//! Repeated calibration draws: how often the conditional false-alarm rate
//! stays below alpha at the required calibration size, and at a smaller one.

use conformal_ood::simulation::{verify_conditional_false_alarm, SyntheticModel};
use conformal_ood::{required_cal_size, CalSizeRequest, DetectorConfig};

fn main() -> conformal_ood::Result<()> {
    let cfg = DetectorConfig::bh(0.1, 1.0, 0.1, 5)?;
    let n_req = required_cal_size(&CalSizeRequest::from_config(&cfg, 1_000_000)?)?;
    let model = SyntheticModel::iid_normal(5, 0)?;
    for n_cal in [n_req, 1000, 300] {
        let r = verify_conditional_false_alarm(&model, &cfg, n_cal, 50, 20_000, 1, 4)?;
        let rates = r.per_calibration_estimates.unwrap_or_default();
        let max = rates.iter().cloned().fold(0.0, f64::max);
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        println!(
            "n_cal = {n_cal:>5}: P_F <= 0.1 in {:.0}% of draws, mean P_F {mean:.4}, max {max:.4}",
            100.0 * r.estimate
        );
    }
    Ok(())
}
