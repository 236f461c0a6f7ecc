use conformal_ood::multiple_testing::{bh_level, bonferroni_threshold};
use conformal_ood::{bh_detect, bonferroni_detect, correction_constant, DetectorConfig, Method};
use proptest::prelude::*;

fn cfg(k: usize) -> DetectorConfig {
    DetectorConfig::bh(0.2, 0.5, 0.1, k).unwrap()
}

fn p_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![0.0f64..0.05, 0.0f64..1.0, Just(0.01), Just(1.0)],
        1..9,
    )
}

proptest! {
    #[test]
    fn decisions_invariant_under_permutation(p in p_vec(), seed in any::<u64>()) {
        let k = p.len();
        let mut q = p.clone();
        // deterministic shuffle from the seed
        let mut s = seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            q.swap(i, (s >> 33) as usize % (i + 1));
        }
        let c = cfg(k);
        let a = bh_detect(&p, &c).unwrap();
        let b = bh_detect(&q, &c).unwrap();
        prop_assert_eq!(a.is_ood, b.is_ood);
        prop_assert_eq!(a.m, b.m);
        prop_assert_eq!(a.sorted_p_values, b.sorted_p_values);
        prop_assert_eq!(
            bonferroni_detect(&p, &c).unwrap().m,
            bonferroni_detect(&q, &c).unwrap().m
        );
    }

    #[test]
    fn lowering_a_p_value_never_clears_an_alarm(p in p_vec(), i in any::<prop::sample::Index>(), f in 0.0f64..=1.0) {
        let c = cfg(p.len());
        let j = i.index(p.len());
        let mut lower = p.clone();
        lower[j] *= f;
        let before = bh_detect(&p, &c).unwrap();
        let after = bh_detect(&lower, &c).unwrap();
        prop_assert!(!before.is_ood || after.is_ood);
        prop_assert!(after.m >= before.m);
        let before = bonferroni_detect(&p, &c).unwrap();
        let after = bonferroni_detect(&lower, &c).unwrap();
        prop_assert!(!before.is_ood || after.is_ood);
    }

    #[test]
    fn rejected_set_is_the_m_smallest(p in p_vec()) {
        let c = cfg(p.len());
        let r = bh_detect(&p, &c).unwrap();
        prop_assert_eq!(r.rejected_indices.len(), r.m);
        let max_rejected = r.rejected_indices.iter().map(|&i| p[i]).fold(f64::NEG_INFINITY, f64::max);
        for (i, &v) in p.iter().enumerate() {
            if !r.rejected_indices.contains(&i) {
                prop_assert!(v >= max_rejected);
            }
        }
        if r.m > 0 {
            prop_assert!(r.sorted_p_values[r.m - 1] <= r.thresholds[r.m - 1]);
        }
        for j in r.m..p.len() {
            prop_assert!(r.sorted_p_values[j] > r.thresholds[j]);
        }
    }
}

#[test]
fn hand_examples() {
    let c = DetectorConfig::bh(0.55, 0.0, 0.1, 3).unwrap();
    let t = c.thresholds();
    assert!((t[0] - 0.1).abs() < 1e-15 && (t[1] - 0.2).abs() < 1e-15 && (t[2] - 0.3).abs() < 1e-15);
    let r = bh_detect(&[0.9, 0.05, 0.25], &c).unwrap();
    assert!(r.is_ood);
    assert_eq!(r.m, 1);
    assert_eq!(r.rejected_indices, vec![1]);
    // step-up: the second p-value alone fails its rung but the third passes
    let r = bh_detect(&[0.15, 0.15, 0.29], &c).unwrap();
    assert_eq!(r.m, 3);
    let r = bh_detect(&[0.11, 0.21, 0.31], &c).unwrap();
    assert!(!r.is_ood);
}

#[test]
fn single_score_thresholds_coincide() {
    for eps in [0.0, 0.3, 1.0] {
        let a = bonferroni_threshold(0.1, eps, 1);
        let b = bh_level(0.1, eps, 1, 1);
        assert!((a - b).abs() < 1e-18);
        assert!((correction_constant(1, eps) - (1.0 + eps)).abs() < 1e-15);
    }
}

#[test]
fn bonferroni_threshold_value() {
    let c = DetectorConfig::bh(0.1, 1.0, 0.1, 5)
        .unwrap()
        .with_method(Method::Bonferroni);
    let r = bonferroni_detect(&[0.01, 0.0099, 0.5, 0.2, 0.3], &c).unwrap();
    assert_eq!(r.thresholds, vec![0.01; 5]);
    assert_eq!(r.m, 2);
    assert_eq!(r.rejected_indices, vec![1, 0]);
}
