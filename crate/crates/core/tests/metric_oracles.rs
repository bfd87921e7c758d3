mod common;

use bankbench::metrics::{average_precision, cap_ratio, decile_ranks, recall_at_k, roc_auc, MetricsReport, RankedPredictions};
use common::{ap_thresholds, auc_pairs, random_predictions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn preds(scores: &[f64], labels: &[u8]) -> RankedPredictions<f64> {
    RankedPredictions::new(scores.to_vec(), labels.to_vec()).unwrap()
}

#[test]
fn auc_and_ap_match_brute_force_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let (s, l) = random_predictions(&mut rng, 300, true);
        let p = preds(&s, &l);
        assert!((roc_auc(&p).unwrap() - auc_pairs(&s, &l)).abs() <= 1e-12);
        assert!((average_precision(&p).unwrap() - ap_thresholds(&s, &l)).abs() <= 1e-12);
    }
}

#[test]
fn cap_ratio_is_gini_without_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let (s, l) = random_predictions(&mut rng, 300, false);
        let p = preds(&s, &l);
        let auc = roc_auc(&p).unwrap();
        assert!((cap_ratio(&p).unwrap() - (2.0 * auc - 1.0)).abs() <= 1e-12);
    }
}

#[test]
fn f32_scores_agree_with_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let (s, l) = random_predictions(&mut rng, 200, true);
        let s32: Vec<f32> = s.iter().map(|&v| v as f32).collect();
        let p32 = RankedPredictions::new(s32, l.clone()).unwrap();
        // The grid values are exact in f32, so rankings are identical.
        assert_eq!(roc_auc(&p32).unwrap(), roc_auc(&preds(&s, &l)).unwrap());
    }
}

#[test]
fn deciles_of_perfect_ranking() {
    let scores: Vec<f64> = (0..100).map(|i| -(i as f64)).collect();
    let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 10)).collect();
    let d = decile_ranks(&preds(&scores, &labels)).unwrap();
    assert!(d.iter().all(|&v| v == 1.0));
    assert_eq!(recall_at_k(&preds(&scores, &labels), 10).unwrap(), 1.0);
    assert_eq!(recall_at_k(&preds(&scores, &labels), 5).unwrap(), 0.5);
}

#[test]
fn random_scores_give_linear_deciles_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut mean = [0.0; 10];
    let reps = 400;
    for _ in 0..reps {
        let scores: Vec<f64> = (0..1000).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let labels: Vec<u8> = (0..1000).map(|i| u8::from(i % 10 == 0)).collect();
        for (m, v) in mean.iter_mut().zip(decile_ranks(&preds(&scores, &labels)).unwrap()) {
            *m += v / reps as f64;
        }
    }
    for (i, m) in mean.iter().enumerate() {
        assert!((m - (i + 1) as f64 / 10.0).abs() < 0.01, "decile {i}: {m}");
    }
}

#[test]
fn report_carries_all_metrics() {
    let r = MetricsReport::compute(&preds(&[0.9, 0.8, 0.3, 0.1], &[1, 0, 1, 0]), 2).unwrap();
    assert_eq!(r.auc, 0.75);
    assert_eq!(r.recall_at_k, 0.5);
    assert!((r.ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    assert_eq!(r.cumulative_decile.len(), 10);
    assert_eq!((r.counts.n, r.counts.n_pos), (4, 2));
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0u8..20, 0u8..2), 2..120)
        .prop_filter("both classes", |v| v.iter().any(|p| p.1 == 0) && v.iter().any(|p| p.1 == 1))
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 4.0, l)).unzip())
}

proptest! {
    #[test]
    fn auc_invariant_under_monotone_maps((s, l) in labelled_scores()) {
        let base = roc_auc(&preds(&s, &l)).unwrap();
        let mapped: Vec<f64> = s.iter().map(|&v| (v * 3.0 - 1.0).exp()).collect();
        prop_assert!((roc_auc(&preds(&mapped, &l)).unwrap() - base).abs() < 1e-12);
        let ap = average_precision(&preds(&s, &l)).unwrap();
        prop_assert!((average_precision(&preds(&mapped, &l)).unwrap() - ap).abs() < 1e-12);
    }

    #[test]
    fn label_inversion_flips_auc((s, l) in labelled_scores()) {
        let inv: Vec<u8> = l.iter().map(|&y| 1 - y).collect();
        let a = roc_auc(&preds(&s, &l)).unwrap();
        let b = roc_auc(&preds(&s, &inv)).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_stay_in_range((s, l) in labelled_scores(), k in 1usize..200) {
        let r = MetricsReport::compute(&preds(&s, &l), k).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.auc));
        prop_assert!(r.ap > 0.0 && r.ap <= 1.0);
        prop_assert!((0.0..=1.0).contains(&r.recall_at_k));
        prop_assert!(r.cap_ratio >= -1.0 - 1e-12 && r.cap_ratio <= 1.0 + 1e-12);
        prop_assert!(r.cumulative_decile.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((r.cumulative_decile[9] - 1.0).abs() < 1e-15);
    }
}
