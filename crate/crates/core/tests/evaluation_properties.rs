#[path = "support/oracle.rs"]
mod oracle;

use conformal_ood::evaluation::{auroc, empirical_fwer, power_at_false_alarm};
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![-3i32..3, -100i32..100].prop_map(f64::from), 1..40)
}

proptest! {
    #[test]
    fn matches_pair_enumeration(a in scores(), b in scores()) {
        let fast = auroc(&a, &b).unwrap();
        let slow = oracle::auroc_pairs(&a, &b);
        prop_assert!((fast - slow).abs() < 1e-15, "{} vs {}", fast, slow);
    }

    #[test]
    fn swapping_sides_sums_to_one(a in scores(), b in scores()) {
        prop_assert_eq!(auroc(&a, &b).unwrap() + auroc(&b, &a).unwrap(), 1.0);
    }

    #[test]
    fn invariant_under_increasing_maps(a in scores(), b in scores()) {
        let f = |v: &f64| (v / 7.0).exp() * 3.0 - 11.0;
        let fa: Vec<f64> = a.iter().map(f).collect();
        let fb: Vec<f64> = b.iter().map(f).collect();
        prop_assert_eq!(auroc(&a, &b).unwrap(), auroc(&fa, &fb).unwrap());
    }

    #[test]
    fn power_is_reported_not_adjusted(
        a in prop::collection::vec(any::<bool>(), 1..50),
        b in prop::collection::vec(any::<bool>(), 1..50),
    ) {
        let r = power_at_false_alarm(&a, &b, 0.1).unwrap();
        let pf = a.iter().filter(|&&x| x).count() as f64 / a.len() as f64;
        let pd = b.iter().filter(|&&x| x).count() as f64 / b.len() as f64;
        prop_assert_eq!((r.pd, r.achieved_pf, r.target_pf), (pd, pf, 0.1));
    }

    #[test]
    fn fwer_counts_rows_with_any_rejection(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..6), 1..30)) {
        let expected = rows.iter().filter(|r| r.contains(&true)).count() as f64 / rows.len() as f64;
        prop_assert_eq!(empirical_fwer(&rows), expected);
    }
}
