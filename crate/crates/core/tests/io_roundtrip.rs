use conformal_ood::io::{
    format_score_matrix, load_class_stats, parse_score_matrix, read_feature_bundles,
    read_results, read_score_matrix, save_class_stats, write_feature_bundles, write_results,
    write_score_matrix, ResultSet, SampleResult,
};
use conformal_ood::scores::{ClassStats, EnergyConfig, FeatureBundle, FitOptions, Layer};
use conformal_ood::{bh_detect, DetectorConfig, Error, ScoreMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_finite(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = f64::from_bits(rng.random());
        if v.is_finite() {
            return v;
        }
    }
}

#[test]
fn thousand_random_doubles_round_trip_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rows: Vec<Vec<f64>> = (0..250)
        .map(|_| (0..4).map(|_| random_finite(&mut rng)).collect())
        .collect();
    let m = ScoreMatrix::new(vec!["a".into(), "b".into(), "c".into(), "d".into()], rows).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    write_score_matrix(&m, &path).unwrap();
    let back = read_score_matrix(&path).unwrap();
    for (r0, r1) in m.rows().iter().zip(back.rows()) {
        for (x, y) in r0.iter().zip(r1) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn seventeen_digit_values_parse_exactly() {
    let text = "x\n0.10000000000000001\n-1.2345678901234567e-300\n";
    let m = parse_score_matrix(text.as_bytes(), "mem").unwrap();
    assert_eq!(m.column(0), vec![0.1, -1.2345678901234567e-300]);
}

#[test]
fn missing_file_is_io_error() {
    let err = read_score_matrix("/nonexistent/scores.csv").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/scores.csv"));
}

#[test]
fn results_round_trip_and_version_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let cfg = DetectorConfig::bh(0.1, 1.0, 0.1, 2).unwrap();
    let empty = ResultSet::new(Some(cfg), vec!["a".into(), "b".into()], 0);
    write_results(&empty, &path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["samples"], serde_json::json!([]));
    assert_eq!(read_results(&path).unwrap(), empty);

    let mut full = empty.clone();
    full.samples.push(SampleResult {
        row: 0,
        sample_id: Some("x".into()),
        detection: bh_detect(&[0.001, 0.7], &cfg).unwrap(),
    });
    write_results(&full, &path).unwrap();
    assert_eq!(read_results(&path).unwrap(), full);

    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("\"schema_version\": 1", "\"schema_version\": 7")).unwrap();
    match read_results(&path) {
        Err(Error::Version { found, expected, .. }) => assert_eq!((found, expected), (7, 1)),
        other => panic!("{other:?}"),
    }
}

fn features(rng: &mut ChaCha8Rng, n: usize) -> Vec<FeatureBundle> {
    (0..n)
        .map(|i| {
            let c = i % 3;
            let conv: Vec<f64> = (0..12).map(|_| rng.random::<f64>() + c as f64).collect();
            let fc: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0).collect();
            let mut logits: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            logits[c] += 2.0;
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            let softmax = logits.iter().map(|l| l.exp() / z).collect();
            FeatureBundle::new(vec![
                Layer::new(vec![3, 4], conv).unwrap(),
                Layer::vector(fc),
            ])
            .with_label(c)
            .with_prediction(c)
            .with_softmax(softmax)
        })
        .collect()
}

#[test]
fn reloaded_stats_score_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let train = features(&mut rng, 60);
    let stats = ClassStats::fit(&train, &FitOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stats.json");
    save_class_stats(&stats, &path).unwrap();
    let loaded = load_class_stats(&path).unwrap();
    assert_eq!(loaded, stats);

    let probes = features(&mut rng, 100);
    let kinds = stats.score_kinds(true);
    let energy = EnergyConfig::default();
    let a = stats.score_matrix(&probes, &kinds, &energy).unwrap();
    let b = loaded.score_matrix(&probes, &kinds, &energy).unwrap();
    for (r0, r1) in a.rows().iter().zip(b.rows()) {
        for (x, y) in r0.iter().zip(r1) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    let wrong = FeatureBundle::new(vec![Layer::vector(vec![1.0; 12]), Layer::vector(vec![0.0; 3])]);
    assert!(matches!(loaded.check_compatible(&wrong), Err(Error::ShapeMismatch(_))));
}

#[test]
fn corrupted_stats_fail_checksum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let stats = ClassStats::fit(&features(&mut rng, 30), &FitOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stats.json");
    save_class_stats(&stats, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let pos = text.find("\"lambda\": ").unwrap() + "\"lambda\": ".len();
    let mut bytes = text.into_bytes();
    // flip one digit of the stored ridge
    let d = bytes[pos..].iter().position(u8::is_ascii_digit).unwrap() + pos;
    bytes[d] = if bytes[d] == b'9' { b'1' } else { bytes[d] + 1 };
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(load_class_stats(&path), Err(Error::Checksum(_))));
}

#[test]
fn feature_file_round_trip_and_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let bundles = features(&mut rng, 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    write_feature_bundles(&bundles, &path).unwrap();
    assert_eq!(read_feature_bundles(&path).unwrap(), bundles);

    let bad = r#"{"schema_version": 1, "bundles": [{"layers": [{"shape": [2, 2], "data": [1, 2, 3]}]}]}"#;
    std::fs::write(&path, bad).unwrap();
    let err = read_feature_bundles(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }), "{err}");
}

#[test]
fn formatting_uses_shortest_representation() {
    let m = ScoreMatrix::new(vec!["v".into()], vec![vec![0.1], vec![1e-7], vec![3.0]]).unwrap();
    let mut buf = Vec::new();
    format_score_matrix(&m, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "v\n0.1\n1e-7\n3.0\n");
}
