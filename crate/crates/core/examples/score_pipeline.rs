//! From network features to a score matrix: fit Mahalanobis and Gram
//! statistics on labeled training features, score new inputs, then detect.

use conformal_ood::scores::{ClassStats, EnergyConfig, FeatureBundle, FitOptions, Layer};
use conformal_ood::{CalibrationSet, DetectorConfig, OodDetector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// fake features: a 4×3 "conv" map and a 6-vector, class-dependent,
// non-negative as after a ReLU
fn bundle(rng: &mut ChaCha8Rng, class: usize, scale: f64) -> FeatureBundle {
    let conv: Vec<f64> = (0..12)
        .map(|i| scale * (rng.random::<f64>() + if i / 3 == class { 1.5 } else { 0.0 }))
        .collect();
    let fc: Vec<f64> = (0..6)
        .map(|i| scale * (rng.random::<f64>() + if i == class { 2.0 } else { 0.0 }))
        .collect();
    let mut logits = [0.0f64; 4];
    logits[class] = 3.0 * rng.random::<f64>() + 1.0;
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    let softmax = logits.iter().map(|l| l.exp() / z).collect();
    FeatureBundle::new(vec![Layer::new(vec![4, 3], conv).unwrap(), Layer::vector(fc)])
        .with_label(class)
        .with_prediction(class)
        .with_softmax(softmax)
}

fn main() -> conformal_ood::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let train: Vec<_> = (0..400).map(|i| bundle(&mut rng, i % 4, 1.0)).collect();
    let stats = ClassStats::fit(&train, &FitOptions::default())?;
    let kinds = stats.score_kinds(true);
    let energy = EnergyConfig::default();

    let cal_inputs: Vec<_> = (0..800).map(|i| bundle(&mut rng, i % 4, 1.0)).collect();
    let cal = stats.score_matrix(&cal_inputs, &kinds, &energy)?;
    println!("scores: {}", cal.names().join(", "));

    let cfg = DetectorConfig::bh(0.1, 1.0, 0.1, cal.k())?;
    let detector = OodDetector::new(CalibrationSet::from_rows(cal.names().to_vec(), cal.rows())?, cfg)?;
    for (label, scale) in [("in-distribution", 1.0), ("rescaled features", 2.5)] {
        let inputs: Vec<_> = (0..200).map(|i| bundle(&mut rng, i % 4, scale)).collect();
        let m = stats.score_matrix(&inputs, &kinds, &energy)?;
        let flagged = m.rows().iter().filter(|r| detector.is_ood(r)).count();
        println!("{label}: {flagged} of 200 flagged");
    }
    Ok(())
}
