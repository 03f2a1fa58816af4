mod common;

use common::*;
use kmvnmf::metrics::{evaluate, matched_accuracy, nmi, rand_and_mirkin};
use proptest::prelude::*;

#[test]
fn exhaustive_small_partitions_match_oracles() {
    for n in 2..=6 {
        let parts = set_partitions(n, 3);
        for t in &parts {
            for p in &parts {
                assert!((matched_accuracy(t, p).unwrap() - accuracy_oracle(t, p)).abs() <= 1e-12);
                assert!((nmi(t, p).unwrap() - nmi_oracle(t, p)).abs() <= 1e-12, "{t:?} {p:?}");
                let (ri, mi) = rand_and_mirkin(t, p).unwrap();
                assert!((ri - rand_oracle(t, p)).abs() <= 1e-12);
                assert_eq!(mi, 1.0 - ri);
            }
        }
    }
}

#[test]
fn partition_counts_are_stirling_sums() {
    // S(n,1) + S(n,2) + S(n,3)
    assert_eq!(set_partitions(4, 3).len(), 1 + 7 + 6);
    assert_eq!(set_partitions(8, 3).len(), 1 + 127 + 966);
}

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

proptest! {
    #[test]
    fn metrics_are_label_permutation_invariant(
        (truth, pred) in (2usize..40).prop_flat_map(|n| (labels(n, 4), labels(n, 5))),
        perm in Just(()).prop_perturb(|_, mut rng| {
            let mut p: Vec<usize> = (0..5).collect();
            for i in (1..5).rev() {
                p.swap(i, rng.random_range(0..=i));
            }
            p
        }),
    ) {
        let relabeled: Vec<usize> = pred.iter().map(|c| perm[*c]).collect();
        let a = evaluate(&truth, &pred).unwrap();
        let b = evaluate(&truth, &relabeled).unwrap();
        prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
        prop_assert!((a.nmi - b.nmi).abs() < 1e-12);
        prop_assert_eq!(a.rand_index, b.rand_index);
        let swapped = evaluate(&relabeled, &truth).unwrap();
        prop_assert!((a.nmi - swapped.nmi).abs() < 1e-12);
        prop_assert_eq!(a.rand_index, swapped.rand_index);
    }

    /// With at most k predicted clusters, a uniformly random bijection matches
    /// n/k samples in expectation, so the best one matches at least that.
    #[test]
    fn accuracy_floor_on_balanced_classes(k in 2usize..5, per in 1usize..6, raw in prop::collection::vec(0usize..100, 25)) {
        let truth: Vec<usize> = (0..k * per).map(|i| i % k).collect();
        let pred: Vec<usize> = raw[..truth.len()].iter().map(|x| x % k).collect();
        let acc = matched_accuracy(&truth, &pred).unwrap();
        prop_assert!(acc >= 1.0 / k as f64 - 1e-12);
    }
}
