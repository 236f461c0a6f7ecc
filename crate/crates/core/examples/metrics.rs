//! Power at a fixed false alarm, per-score AUROC and empirical FWER.

use conformal_ood::evaluation::{auroc, empirical_fwer, evaluate_detector};
use conformal_ood::simulation::SyntheticModel;
use conformal_ood::{bh_detect, CalibrationSet, DetectorConfig, OodDetector};
use rand::{Rng, SeedableRng};

fn main() -> conformal_ood::Result<()> {
    println!("auroc([1, 3], [2, 4]) = {}", auroc(&[1.0, 3.0], &[2.0, 4.0])?);

    let k = 3;
    let cfg = DetectorConfig::bh(0.1, 1.0, 0.1, k)?;
    let cal = SyntheticModel::iid_normal(k, 0)?.sample_matrix(1500, 1)?;
    let detector = OodDetector::new(CalibrationSet::from_rows(cal.names().to_vec(), cal.rows())?, cfg)?;
    let in_dist = SyntheticModel::iid_normal(k, 0)?.sample_matrix(5000, 2)?;
    let ood = SyntheticModel::shifted(vec![3.0, 1.0, 0.0], 1)?.sample_matrix(5000, 2)?;
    let report = evaluate_detector(&detector, &in_dist, &ood)?;
    println!(
        "P_D = {:.4} at P_F = {:.4} (alpha {})",
        report.power.pd, report.power.achieved_pf, report.power.target_pf
    );
    for s in &report.per_score_auroc {
        println!("  AUROC {} = {:.4}", s.name, s.auroc);
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let cfg5 = DetectorConfig::bh(0.1, 1.0, 0.1, 5)?;
    let rows: Vec<Vec<bool>> = (0..50_000)
        .map(|_| {
            let p: Vec<f64> = (0..5).map(|_| rng.random()).collect();
            let r = bh_detect(&p, &cfg5).unwrap();
            (0..5).map(|i| r.rejected_indices.contains(&i)).collect()
        })
        .collect();
    println!("FWER of BH on uniform p-values, K = 5: {:.4}", empirical_fwer(&rows));
    Ok(())
}
