//! The individual operators. Each random operator is split into a draw
//! (which positions, which window, which permutation, which neighbor) and a
//! deterministic `*_at` function that applies a given draw, so the reachable
//! output set can be enumerated exhaustively in tests.

use rand::seq::index::sample;
use rand::Rng;

use super::similarity::ItemSimilarityIndex;
use crate::data::ItemIdx;
use crate::nn::Tensor2D;

/// `max(1, ⌊ratio · n⌋)`, never more than `n`.
pub fn selected_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).floor() as usize).max(1).min(n)
}

/// Like [`selected_count`] but always leaves at least one element.
pub fn removal_count(ratio: f64, n: usize) -> usize {
    selected_count(ratio, n).min(n.saturating_sub(1))
}

fn sorted_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

pub fn crop_at(s: &[ItemIdx], start: usize, len: usize) -> Vec<ItemIdx> {
    s[start..start + len].to_vec()
}

pub fn apply_crop<R: Rng + ?Sized>(s: &[ItemIdx], ratio: f64, rng: &mut R) -> Vec<ItemIdx> {
    let len = selected_count(ratio, s.len());
    let start = rng.gen_range(0..=s.len() - len);
    crop_at(s, start, len)
}

/// Rearranges `s[start..start + perm.len()]` so that window slot `j` holds
/// the original window element `perm[j]`.
pub fn reorder_at(s: &[ItemIdx], start: usize, perm: &[usize]) -> Vec<ItemIdx> {
    let mut out = s.to_vec();
    for (j, &p) in perm.iter().enumerate() {
        out[start + j] = s[start + p];
    }
    out
}

pub fn apply_reorder<R: Rng + ?Sized>(s: &[ItemIdx], ratio: f64, rng: &mut R) -> Vec<ItemIdx> {
    let len = selected_count(ratio, s.len());
    let start = rng.gen_range(0..=s.len() - len);
    let mut out = s.to_vec();
    // Fisher–Yates over the window
    for i in (1..len).rev() {
        let j = rng.gen_range(0..=i);
        out.swap(start + i, start + j);
    }
    out
}

pub fn mask_at(s: &[ItemIdx], positions: &[usize], mask_token: ItemIdx) -> Vec<ItemIdx> {
    let mut out = s.to_vec();
    for &p in positions {
        out[p] = mask_token;
    }
    out
}

pub fn apply_mask<R: Rng + ?Sized>(
    s: &[ItemIdx],
    ratio: f64,
    mask_token: ItemIdx,
    rng: &mut R,
) -> Vec<ItemIdx> {
    let positions = sorted_sample(rng, s.len(), selected_count(ratio, s.len()));
    mask_at(s, &positions, mask_token)
}

/// Replaces `s[pos]` with neighbor number `choice` of the original item.
/// Items without neighbors are left unchanged.
pub fn substitute_at(
    s: &[ItemIdx],
    picks: &[(usize, usize)],
    index: &ItemSimilarityIndex,
) -> Vec<ItemIdx> {
    let mut out = s.to_vec();
    for &(pos, choice) in picks {
        if let Some(&(n, _)) = index.neighbors(s[pos]).get(choice) {
            out[pos] = n;
        }
    }
    out
}

fn neighbor_picks<R: Rng + ?Sized>(
    s: &[ItemIdx],
    count: usize,
    index: &ItemSimilarityIndex,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    sorted_sample(rng, s.len(), count)
        .into_iter()
        .map(|pos| {
            let k = index.neighbors(s[pos]).len();
            (pos, if k == 0 { 0 } else { rng.gen_range(0..k) })
        })
        .collect()
}

pub fn apply_substitute<R: Rng + ?Sized>(
    s: &[ItemIdx],
    ratio: f64,
    index: &ItemSimilarityIndex,
    rng: &mut R,
) -> Vec<ItemIdx> {
    let picks = neighbor_picks(s, selected_count(ratio, s.len()), index, rng);
    substitute_at(s, &picks, index)
}

/// After each picked position, inserts the chosen neighbor of the item there.
/// The result keeps only the most recent `max_len` items.
pub fn insert_at(
    s: &[ItemIdx],
    picks: &[(usize, usize)],
    index: &ItemSimilarityIndex,
    max_len: usize,
) -> Vec<ItemIdx> {
    let mut out = Vec::with_capacity(s.len() + picks.len());
    let mut next = picks.iter().peekable();
    for (pos, &item) in s.iter().enumerate() {
        out.push(item);
        while let Some(&&(p, choice)) = next.peek() {
            if p != pos {
                break;
            }
            if let Some(&(n, _)) = index.neighbors(item).get(choice) {
                out.push(n);
            }
            next.next();
        }
    }
    let drop = out.len().saturating_sub(max_len);
    out.drain(..drop);
    out
}

pub fn apply_insert<R: Rng + ?Sized>(
    s: &[ItemIdx],
    ratio: f64,
    index: &ItemSimilarityIndex,
    max_len: usize,
    rng: &mut R,
) -> Vec<ItemIdx> {
    let picks = neighbor_picks(s, selected_count(ratio, s.len()), index, rng);
    insert_at(s, &picks, index, max_len)
}

pub fn tmask_r_at(s: &[ItemIdx], removed: &[usize]) -> Vec<ItemIdx> {
    let mut drop = vec![false; s.len()];
    removed.iter().for_each(|&p| drop[p] = true);
    s.iter()
        .zip(drop)
        .filter(|(_, d)| !d)
        .map(|(&i, _)| i)
        .collect()
}

/// Removes `max(1, ⌊ratio·n⌋)` items (at most `n − 1`). A single-item
/// sequence is returned unchanged with the flag set.
pub fn apply_tmask_r<R: Rng + ?Sized>(
    s: &[ItemIdx],
    ratio: f64,
    rng: &mut R,
) -> (Vec<ItemIdx>, bool) {
    if s.len() < 2 {
        return (s.to_vec(), true);
    }
    let removed = sorted_sample(rng, s.len(), removal_count(ratio, s.len()));
    (tmask_r_at(s, &removed), false)
}

/// `E + ε` with `ε ~ U(a, b)` elementwise.
pub fn apply_tnoise<R: Rng + ?Sized>(reps: &Tensor2D, a: f64, b: f64, rng: &mut R) -> Tensor2D {
    let mut out = reps.clone();
    for v in out.data_mut() {
        let u: f64 = rng.gen();
        *v += a + (b - a) * u;
    }
    out
}

pub fn tmask_b_at(reps: &Tensor2D, rows: &[usize]) -> Tensor2D {
    let mut out = reps.clone();
    for &r in rows {
        out.row_mut(r).iter_mut().for_each(|v| *v = 0.0);
    }
    out
}

pub fn apply_tmask_b<R: Rng + ?Sized>(reps: &Tensor2D, ratio: f64, rng: &mut R) -> (Tensor2D, bool) {
    let n = reps.rows();
    if n < 2 {
        return (reps.clone(), true);
    }
    let rows = sorted_sample(rng, n, removal_count(ratio, n));
    (tmask_b_at(reps, &rows), false)
}
