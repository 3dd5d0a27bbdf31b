//! Oracles and fixtures shared by the integration suites and the acceptance
//! target. Every check returns a summary instead of panicking so the
//! acceptance runner can report it.
#![allow(dead_code)]

pub mod gradcheck;
pub mod operators;
pub mod pipeline;

use adatta::data::{InteractionDataset, ItemIdx};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rank by sorting every candidate: descending score, then ascending index.
pub fn brute_force_rank(scores: &[f64], target: ItemIdx) -> usize {
    let mut order: Vec<usize> = (1..scores.len() - 1).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    1 + order.iter().position(|&i| i == target).unwrap()
}

pub fn brute_force_hr(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// Textbook `1 / log2(rank + 1)`; the independent part of the oracle is the
/// sort-based rank, so equal ranks must give bitwise equal values.
pub fn brute_force_ndcg(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// Score vector with padding and mask slots at −∞ and coarse values in
/// between so that ties are common.
pub fn random_scores<R: Rng>(rng: &mut R, num_items: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..num_items + 2)
        .map(|_| (rng.gen_range(-20..20) as f64) / 4.0)
        .collect();
    s[0] = f64::NEG_INFINITY;
    s[num_items + 1] = f64::NEG_INFINITY;
    s
}

pub fn dataset(sequences: Vec<Vec<ItemIdx>>, num_items: usize) -> InteractionDataset {
    let users = (0..sequences.len()).map(|u| format!("u{u}")).collect::<Vec<_>>();
    let items = (1..=num_items).map(|i| format!("i{i}")).collect::<Vec<_>>();
    InteractionDataset::from_sequences(users.into(), items.into(), sequences).unwrap()
}

/// One line of the acceptance table.
pub fn verdict(id: &str, pass: bool, detail: &str) -> String {
    format!("[{}] criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" })
}

/// Checks rank, HR@K and NDCG@K against the sorting oracle on `vectors`
/// random score vectors. Returns the number of comparisons and mismatches.
pub fn metric_oracle(seed: u64, vectors: usize) -> (usize, Vec<String>) {
    use adatta::metrics::{hr_at_k, ndcg_at_k, target_rank, MetricsSummary};
    let mut r = rng(seed);
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut ranks = Vec::new();
    for v in 0..vectors {
        let n = r.gen_range(1..60);
        let scores = random_scores(&mut r, n);
        let target = r.gen_range(1..=n);
        let want = brute_force_rank(&scores, target);
        let got = target_rank(&scores, target);
        if got != want {
            bad.push(format!("vector {v}: rank {got} != {want}"));
        }
        for k in [1, 3, 5, 10, 20] {
            if hr_at_k(got, k) != brute_force_hr(want, k) || ndcg_at_k(got, k) != brute_force_ndcg(want, k) {
                bad.push(format!("vector {v}: metrics at K={k} for rank {want}"));
            }
            checked += 2;
        }
        checked += 1;
        ranks.push(want);
    }
    let summary = MetricsSummary::from_ranks(&ranks);
    for (j, &k) in adatta::metrics::CUTOFFS.iter().enumerate() {
        let hr = ranks.iter().map(|&x| brute_force_hr(x, k)).sum::<f64>() / ranks.len() as f64;
        let nd = ranks.iter().map(|&x| brute_force_ndcg(x, k)).sum::<f64>() / ranks.len() as f64;
        if summary.hr[j] != hr || summary.ndcg[j] != nd {
            bad.push(format!("summary at K={k}"));
        }
        checked += 2;
    }
    (checked, bad)
}

/// Tier table written out independently: Δ ≥ 0.1 → 2, 0 < Δ → 1, Δ = 0 → 0, else −1.
pub fn oracle_macro(rank_base: usize, rank_aug: usize, k: usize) -> f64 {
    let d = brute_force_ndcg(rank_aug, k) - brute_force_ndcg(rank_base, k);
    if d >= 0.1 {
        2.0
    } else if d > 0.0 {
        1.0
    } else if d == 0.0 {
        0.0
    } else {
        -1.0
    }
}

/// `(case, library value, hand value)` for every ledger row.
pub fn reward_ledger() -> Vec<(String, f64, f64)> {
    use adatta::policy::{combined_reward, RewardConfig};
    let cfg = RewardConfig::default();
    let mut rows = Vec::new();
    for (b, a) in [(1, 1), (15, 1), (2, 3), (3, 2), (10, 9), (12, 10), (9, 11), (40, 30), (7, 7)] {
        rows.push((format!("macro {b}->{a}"), cfg.macro_reward(b, a), oracle_macro(b, a, 10)));
    }
    let hand = [
        ("macro 2->3 by hand", cfg.macro_reward(2, 3), -1.0),
        ("macro 11->1 by hand", cfg.macro_reward(11, 1), 2.0),
        ("rank 1->1", cfg.rank_reward(1, 1), 0.0),
        ("rank 250->150", cfg.rank_reward(250, 150), 1.0),
        ("rank 5->55", cfg.rank_reward(5, 55), -0.5),
        ("rank 30->12", cfg.rank_reward(30, 12), 0.18),
        ("rank 400->100", cfg.rank_reward(400, 100), 1.0),
        ("combined (0.2,0.8) on (1,-0.5)", combined_reward(1.0, -0.5, 0.2, 0.8), -0.2),
    ];
    rows.extend(hand.into_iter().map(|(n, g, w)| (n.to_string(), g, w)));
    let metric_only = RewardConfig { alpha: 1.0, beta: 0.0, ..RewardConfig::default() };
    let rank_only = RewardConfig { alpha: 0.0, beta: 1.0, ..RewardConfig::default() };
    for (b, a) in [(15, 1), (2, 3), (30, 12), (5, 55)] {
        rows.push((format!("metric-only {b}->{a}"), metric_only.reward(b, a), metric_only.macro_reward(b, a)));
        rows.push((format!("rank-only {b}->{a}"), rank_only.reward(b, a), (b as f64 - a as f64) / 100.0));
    }
    rows.push(("default 15->1".into(), cfg.reward(15, 1), 0.2 * 2.0 + 0.8 * 0.14));
    rows
}
