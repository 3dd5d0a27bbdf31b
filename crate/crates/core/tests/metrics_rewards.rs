mod common;

use adatta::metrics::{hr_at_k, ndcg_at_k, target_rank, MetricsSummary};
use adatta::policy::{RewardConfig, Tier};
use proptest::prelude::*;

#[test]
fn ranks_and_metrics_match_the_sorting_oracle() {
    let (checked, bad) = common::metric_oracle(11, 1000);
    assert!(checked > 10_000);
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn closed_form_cutoffs() {
    assert_eq!((hr_at_k(1, 10), ndcg_at_k(1, 10)), (1.0, 1.0));
    assert_eq!(ndcg_at_k(3, 10), 0.5);
    assert_eq!((hr_at_k(11, 10), ndcg_at_k(11, 10)), (0.0, 0.0));
}

#[test]
fn ties_go_to_the_lower_index() {
    let flat = [f64::NEG_INFINITY, 0.5, 0.5, 0.5, 0.5, f64::NEG_INFINITY];
    for t in 1..=4 {
        assert_eq!(target_rank(&flat, t), t);
    }
    // the −∞ padding and mask slots never outrank a real item
    let low = [f64::NEG_INFINITY, -1e300, f64::NEG_INFINITY];
    assert_eq!(target_rank(&low, 1), 1);
}

#[test]
fn summary_recombines_from_groups() {
    let ranks = [1, 4, 7, 12, 30, 2, 9];
    let whole = MetricsSummary::from_ranks(&ranks);
    let parts = [MetricsSummary::from_ranks(&ranks[..3]), MetricsSummary::from_ranks(&ranks[3..])];
    let joined = MetricsSummary::combine(&parts);
    assert_eq!(joined.users, 7);
    for j in 0..3 {
        assert!((joined.hr[j] - whole.hr[j]).abs() < 1e-12);
        assert!((joined.ndcg[j] - whole.ndcg[j]).abs() < 1e-12);
    }
}

#[test]
fn reward_ledger_is_exact() {
    for (case, got, want) in common::reward_ledger() {
        assert_eq!(got, want, "{case}");
    }
}

#[test]
fn custom_tiers_are_honoured() {
    let cfg = RewardConfig {
        tiers: vec![Tier { threshold: 0.3, strict: false, reward: 5.0 }],
        below_tiers: -2.0,
        ..RewardConfig::default()
    };
    assert_eq!(cfg.macro_reward(11, 1), 5.0);
    assert_eq!(cfg.macro_reward(3, 2), -2.0);
}

proptest! {
    #[test]
    fn ndcg_never_exceeds_hr_and_both_grow_with_k(rank in 1usize..200) {
        let ks = [5, 10, 20];
        for w in ks.windows(2) {
            prop_assert!(hr_at_k(rank, w[0]) <= hr_at_k(rank, w[1]));
            prop_assert!(ndcg_at_k(rank, w[0]) <= ndcg_at_k(rank, w[1]));
        }
        for k in ks {
            prop_assert!(ndcg_at_k(rank, k) <= hr_at_k(rank, k));
        }
    }

    #[test]
    fn rank_lies_within_the_item_set(seed in any::<u64>(), n in 1usize..80) {
        let mut r = common::rng(seed);
        let scores = common::random_scores(&mut r, n);
        for t in 1..=n {
            let rank = target_rank(&scores, t);
            prop_assert!((1..=n).contains(&rank));
        }
        // ranks are a permutation of 1..=n
        let mut all: Vec<usize> = (1..=n).map(|t| target_rank(&scores, t)).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (1..=n).collect::<Vec<_>>());
    }

    #[test]
    fn rank_reward_is_bounded_and_antisymmetric(a in 1usize..500, b in 1usize..500) {
        let cfg = RewardConfig::default();
        let r = cfg.rank_reward(a, b);
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(r, -cfg.rank_reward(b, a));
    }
}
