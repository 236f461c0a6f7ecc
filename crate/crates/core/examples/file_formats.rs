//! Round trip through the on-disk formats: score CSV, results JSON and the
//! checksummed statistics file.

use conformal_ood::io::{
    load_class_stats, read_results, read_score_matrix, save_class_stats, write_results,
    write_score_matrix, ResultSet, SampleResult,
};
use conformal_ood::scores::{ClassStats, FeatureBundle, FitOptions, Layer};
use conformal_ood::simulation::SyntheticModel;
use conformal_ood::{CalibrationSet, DetectorConfig, OodDetector, ScoreMatrix};

fn main() -> conformal_ood::Result<()> {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();

    let cal = SyntheticModel::iid_normal(3, 0)?.sample_matrix(200, 1)?;
    let test = SyntheticModel::shifted(vec![0.0, 3.0, 3.0], 1)?.sample_matrix(4, 2)?;
    let ids: Vec<String> = (0..4).map(|i| format!("img_{i}")).collect();
    let test = ScoreMatrix::with_ids(test.names().to_vec(), Some(ids), test.rows().to_vec())?;
    write_score_matrix(&cal, dir.join("cal.csv"))?;
    write_score_matrix(&test, dir.join("test.csv"))?;
    let cal = read_score_matrix(dir.join("cal.csv"))?;
    let test = read_score_matrix(dir.join("test.csv"))?;
    println!("{}", std::fs::read_to_string(dir.join("test.csv")).unwrap());

    let cfg = DetectorConfig::bh(0.1, 1.0, 0.1, 3)?;
    let detector = OodDetector::new(CalibrationSet::from_rows(cal.names().to_vec(), cal.rows())?, cfg)?;
    let mut results = ResultSet::new(Some(cfg), cal.names().to_vec(), cal.n_rows());
    for (row, scores) in test.rows().iter().enumerate() {
        results.samples.push(SampleResult {
            row,
            sample_id: test.ids().map(|ids| ids[row].clone()),
            detection: detector.detect(scores)?,
        });
    }
    write_results(&results, dir.join("results.json"))?;
    println!("results: {} of {} OOD", read_results(dir.join("results.json"))?.n_ood(), test.n_rows());

    let train: Vec<_> = (0..20)
        .map(|i| {
            FeatureBundle::new(vec![Layer::vector(vec![(i % 2) as f64 * 3.0 + (i % 7) as f64 / 7.0, (i % 5) as f64 / 5.0])])
                .with_label(i % 2)
                .with_prediction(i % 2)
        })
        .collect();
    let stats = ClassStats::fit(&train, &FitOptions::default())?;
    save_class_stats(&stats, dir.join("stats.json"))?;
    assert_eq!(load_class_stats(dir.join("stats.json"))?, stats);

    // any edit to the payload breaks the checksum
    let text = std::fs::read_to_string(dir.join("stats.json")).unwrap();
    std::fs::write(dir.join("stats.json"), text.replacen("\"lambda\": ", "\"lambda\": 1", 1)).unwrap();
    if let Err(e) = load_class_stats(dir.join("stats.json")) {
        println!("tampered stats rejected: {e}");
    }
    Ok(())
}
