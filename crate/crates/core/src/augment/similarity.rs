use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backbone::Backbone;
use crate::data::ItemIdx;
use crate::nn::tensor::cosine;
use crate::nn::Tensor2D;

/// Exact top-k cosine neighbors of every item under an embedding table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemSimilarityIndex {
    k: usize,
    /// Indexed by item; padding and mask entries are empty.
    neighbors: Vec<Vec<(ItemIdx, f64)>>,
}

impl ItemSimilarityIndex {
    /// `table` has rows `0..=num_items + 1`; only rows `1..=num_items` take part.
    /// `k` is clamped to `num_items − 1`.
    pub fn from_table(table: &Tensor2D, num_items: usize, k: usize) -> Self {
        let k = k.min(num_items.saturating_sub(1));
        let mut neighbors: Vec<Vec<(ItemIdx, f64)>> = (1..=num_items)
            .into_par_iter()
            .map(|i| {
                let mut sims: Vec<(ItemIdx, f64)> = (1..=num_items)
                    .filter(|&j| j != i)
                    .map(|j| (j, cosine(table.row(i), table.row(j))))
                    .collect();
                sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                sims.truncate(k);
                sims
            })
            .collect();
        neighbors.insert(0, Vec::new());
        neighbors.push(Vec::new());
        Self { k, neighbors }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Neighbors of `item` in descending similarity (ties by ascending index).
    pub fn neighbors(&self, item: ItemIdx) -> &[(ItemIdx, f64)] {
        self.neighbors.get(item).map_or(&[], Vec::as_slice)
    }
}

pub fn build_similarity_index(backbone: &Backbone, k: usize) -> ItemSimilarityIndex {
    ItemSimilarityIndex::from_table(backbone.embedding_table(), backbone.num_items(), k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> Tensor2D {
        let d = rows[0].len();
        let mut all = vec![vec![0.0; d]];
        all.extend(rows.iter().map(|r| r.to_vec()));
        all.push(vec![0.0; d]);
        Tensor2D::from_rows(&all).unwrap()
    }

    #[test]
    fn duplicate_rows_are_mutual_top1() {
        let t = table(&[&[1.0, 2.0], &[0.0, 1.0], &[1.0, 2.0]]);
        let idx = ItemSimilarityIndex::from_table(&t, 3, 1);
        assert_eq!(idx.neighbors(1)[0].0, 3);
        assert_eq!(idx.neighbors(3)[0].0, 1);
        assert!((idx.neighbors(1)[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_items_tie_break_by_index() {
        let t = table(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let idx = ItemSimilarityIndex::from_table(&t, 3, 5);
        assert_eq!(idx.k(), 2);
        assert_eq!(idx.neighbors(2), &[(1, 0.0), (3, 0.0)]);
        assert!(idx.neighbors(0).is_empty());
        assert!(idx.neighbors(4).is_empty());
    }
}
