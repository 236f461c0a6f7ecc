use conformal_ood::scores::{
    fit_gram, fit_mahalanobis, gram_deviation_score, mahalanobis_score, ClassStats, FeatureBundle,
    FitOptions, GramConfig, Layer, Ridge,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_bundles(rng: &mut ChaCha8Rng, n_per_class: usize, dim: usize) -> Vec<FeatureBundle> {
    let mut out = Vec::new();
    for c in 0..3 {
        for _ in 0..n_per_class {
            let x: Vec<f64> = (0..dim)
                .map(|i| rng.sample::<f64, _>(StandardNormal) + if i == c { 3.0 } else { 0.0 })
                .collect();
            out.push(FeatureBundle::new(vec![Layer::vector(x)]).with_label(c));
        }
    }
    out
}

#[test]
fn mahalanobis_is_affine_invariant_without_ridge() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dim = 4;
    let train = gaussian_bundles(&mut rng, 40, dim);
    let a = [
        [2.0, 0.3, 0.0, -1.0],
        [0.0, 1.5, 0.2, 0.0],
        [0.4, 0.0, 0.7, 0.1],
        [0.0, -0.5, 0.0, 3.0],
    ];
    let shift = [1.0, -2.0, 0.5, 10.0];
    let map = |b: &FeatureBundle| -> FeatureBundle {
        let x = &b.layers[0].data;
        let y: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| a[i][j] * x[j]).sum::<f64>() + shift[i])
            .collect();
        FeatureBundle {
            layers: vec![Layer::vector(y)],
            ..b.clone()
        }
    };
    let mapped: Vec<FeatureBundle> = train.iter().map(map).collect();
    let s1 = fit_mahalanobis(&train, Ridge::Absolute(0.0)).unwrap();
    let s2 = fit_mahalanobis(&mapped, Ridge::Absolute(0.0)).unwrap();
    let probes = gaussian_bundles(&mut rng, 5, dim);
    for p in &probes {
        let d1 = mahalanobis_score(&s1, p, 0).unwrap();
        let d2 = mahalanobis_score(&s2, &map(p), 0).unwrap();
        assert!((d1 - d2).abs() < 1e-9 * d1.abs().max(1.0), "{d1} vs {d2}");
    }
}

#[test]
fn gram_deviation_is_zero_on_fitting_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let train: Vec<FeatureBundle> = (0..60)
        .map(|i| {
            let conv: Vec<f64> = (0..2 * 3 * 3).map(|_| rng.random::<f64>() * 2.0).collect();
            let fc: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            FeatureBundle::new(vec![
                Layer::new(vec![2, 3, 3], conv).unwrap(),
                Layer::vector(fc),
            ])
            .with_label(i % 4)
            .with_prediction(i % 4)
        })
        .collect();
    let cfg = GramConfig {
        holdout_fraction: 0.0,
        ..GramConfig::default()
    };
    let stats = fit_gram(&train, &cfg).unwrap();
    for b in &train {
        for layer in 0..2 {
            assert_eq!(gram_deviation_score(&stats, b, layer).unwrap().score, 0.0);
        }
    }
    // with a holdout only the points used for the bounds are guaranteed zero
    let held = fit_gram(&train, &GramConfig::default()).unwrap();
    assert!(held.layers.iter().all(|l| l.normalizer > 0.0));
}

#[test]
fn fitted_scores_are_oriented() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let train: Vec<FeatureBundle> = (0..90)
        .map(|i| {
            let c = i % 3;
            let x: Vec<f64> = (0..6)
                .map(|j| rng.random::<f64>() + if j == c { 2.0 } else { 0.0 })
                .collect();
            FeatureBundle::new(vec![Layer::new(vec![2, 3], x).unwrap()])
                .with_label(c)
                .with_prediction(c)
        })
        .collect();
    let stats = ClassStats::fit(&train, &FitOptions::default()).unwrap();
    let kinds = stats.score_kinds(false);
    let near = stats.score_matrix(&train[..10], &kinds, &Default::default()).unwrap();
    let far_inputs: Vec<FeatureBundle> = train[..10]
        .iter()
        .map(|b| FeatureBundle {
            layers: vec![Layer::new(vec![2, 3], b.layers[0].data.iter().map(|v| v * 6.0 + 5.0).collect()).unwrap()],
            ..b.clone()
        })
        .collect();
    let far = stats.score_matrix(&far_inputs, &kinds, &Default::default()).unwrap();
    assert_eq!(near.names(), ["mahala_L1", "gram_L1"]);
    for i in 0..10 {
        for c in 0..2 {
            assert!(far.row(i)[c] > near.row(i)[c], "row {i} col {c}");
        }
    }
}
