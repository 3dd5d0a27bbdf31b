use serde::{Deserialize, Serialize};

use crate::backbone::Backbone;
use crate::data::ItemIdx;
use crate::error::{Error, Result};
use crate::nn::{cosine, softmax, Tensor2D};

pub const STAT_FEATURES: usize = 8;

pub const STAT_NAMES: [&str; STAT_FEATURES] = [
    "length",
    "distinct_ratio",
    "repeat_fraction",
    "pairwise_cosine",
    "adjacent_cosine",
    "adjacent_cosine_std",
    "popularity",
    "confidence",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub z_sem: Vec<f64>,
    pub z_stat: [f64; STAT_FEATURES],
}

impl PolicyState {
    pub fn dim(&self) -> usize {
        self.z_sem.len() + STAT_FEATURES
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.z_sem.clone();
        v.extend_from_slice(&self.z_stat);
        v
    }
}

fn to_unit(c: f64) -> f64 {
    ((c + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Statistical features of an (already truncated) sequence.
///
/// `popularity` is indexed by item; `base_scores` is the backbone's score
/// vector for `seq`. Cosine features are mapped from [−1, 1] to [0, 1]; a
/// single-item sequence counts as perfectly coherent.
pub fn stat_features(
    seq: &[ItemIdx],
    embeddings: &Tensor2D,
    max_len: usize,
    popularity: &[f64],
    base_scores: &[f64],
) -> Result<[f64; STAT_FEATURES]> {
    let n = seq.len();
    if n == 0 {
        return Err(Error::dim("state of an empty sequence"));
    }
    if let Some(&bad) = seq.iter().find(|&&i| i >= embeddings.rows() || i >= popularity.len()) {
        return Err(Error::ItemOutOfRange {
            item: bad,
            num_items: embeddings.rows().saturating_sub(2),
        });
    }
    let mut distinct = seq.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let repeats = seq.windows(2).filter(|w| w[0] == w[1]).count();
    let repeat_fraction = if n > 1 { repeats as f64 / (n - 1) as f64 } else { 0.0 };

    let emb = |i: usize| embeddings.row(seq[i]);
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            pair_sum += cosine(emb(i), emb(j));
            pairs += 1;
        }
    }
    let pairwise = if pairs > 0 { pair_sum / pairs as f64 } else { 1.0 };

    let adjacent: Vec<f64> = (1..n).map(|i| cosine(emb(i - 1), emb(i))).collect();
    let (adj_mean, adj_std) = if adjacent.is_empty() {
        (1.0, 0.0)
    } else {
        let m = adjacent.iter().sum::<f64>() / adjacent.len() as f64;
        let var = adjacent.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / adjacent.len() as f64;
        (m, var.sqrt())
    };

    let popularity_mean = seq.iter().map(|&i| popularity[i]).sum::<f64>() / n as f64;
    let confidence = softmax(base_scores).into_iter().fold(0.0, f64::max);

    Ok([
        (n as f64 / max_len as f64).min(1.0),
        distinct.len() as f64 / n as f64,
        repeat_fraction,
        to_unit(pairwise),
        to_unit(adj_mean),
        adj_std.clamp(0.0, 1.0),
        popularity_mean.clamp(0.0, 1.0),
        confidence,
    ])
}

/// Hybrid state: mean-pooled hidden states followed by the statistical features.
pub fn build_state(backbone: &Backbone, seq: &[ItemIdx], popularity: &[f64]) -> Result<PolicyState> {
    let s = backbone.truncate(seq);
    let hidden = backbone.encode(s)?;
    let base_scores = backbone.score(hidden.row(hidden.rows() - 1))?;
    let z_stat = stat_features(
        s,
        backbone.embedding_table(),
        backbone.max_len(),
        popularity,
        &base_scores,
    )?;
    let z_sem = hidden.mean_rows();
    if z_sem.iter().chain(&z_stat).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("policy state".into()));
    }
    Ok(PolicyState { z_sem, z_stat })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Tensor2D {
        Tensor2D::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn repeated_item() {
        let pop = vec![0.0, 0.5, 0.5, 0.5, 0.0];
        let f = stat_features(&[1, 1, 1, 1], &table(), 4, &pop, &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 0.25);
        assert_eq!(f[2], 1.0);
        assert!((f[3] - 1.0).abs() < 1e-12);
        assert!((f[4] - 1.0).abs() < 1e-12);
        assert!(f[5].abs() < 1e-12);
        assert_eq!(f[6], 0.5);
    }

    #[test]
    fn single_item() {
        let pop = vec![0.0, 0.2, 0.5, 0.5, 0.0];
        let f = stat_features(&[2], &table(), 10, &pop, &[0.0]).unwrap();
        assert_eq!(f, [0.1, 1.0, 0.0, 1.0, 1.0, 0.0, 0.5, 1.0]);
    }
}
