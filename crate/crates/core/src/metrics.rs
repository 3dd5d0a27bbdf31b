//! Top-K ranking metrics over the full item set.

use serde::{Deserialize, Serialize};

use crate::data::ItemIdx;
use crate::error::{Error, Result};

pub const CUTOFFS: [usize; 3] = [5, 10, 20];

pub fn hr_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// 1-based rank of `target` among items `1..scores.len() − 1` under
/// descending score; equal scores rank by ascending item index. The first
/// and last entries (padding and mask token) never take part.
pub fn target_rank(scores: &[f64], target: ItemIdx) -> usize {
    let last = scores.len() - 1;
    debug_assert!(target >= 1 && target < last);
    let t = scores[target];
    1 + (1..last)
        .filter(|&i| {
            let s = scores[i];
            s > t || (s == t && i < target)
        })
        .count()
}

/// Which number a report or oracle is judged by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    Hr(usize),
    Ndcg(usize),
}

impl Metric {
    pub fn of_rank(self, rank: usize) -> f64 {
        match self {
            Metric::Hr(k) => hr_at_k(rank, k),
            Metric::Ndcg(k) => ndcg_at_k(rank, k),
        }
    }
}

impl Default for Metric {
    fn default() -> Self {
        Metric::Hr(10)
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Hr(k) => write!(f, "H@{k}"),
            Metric::Ndcg(k) => write!(f, "N@{k}"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown metric `{s}` (use e.g. H@10 or N@5)"));
        let (kind, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        match kind.to_ascii_uppercase().as_str() {
            "H" | "HR" => Ok(Metric::Hr(k)),
            "N" | "NDCG" => Ok(Metric::Ndcg(k)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.to_string()
    }
}

/// Mean H@{5,10,20} and N@{5,10,20} over a set of users.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub users: usize,
    pub hr: [f64; 3],
    pub ndcg: [f64; 3],
}

impl MetricsSummary {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let mut s = Self {
            users: ranks.len(),
            ..Default::default()
        };
        if ranks.is_empty() {
            return s;
        }
        for (j, &k) in CUTOFFS.iter().enumerate() {
            s.hr[j] = ranks.iter().map(|&r| hr_at_k(r, k)).sum::<f64>() / ranks.len() as f64;
            s.ndcg[j] = ranks.iter().map(|&r| ndcg_at_k(r, k)).sum::<f64>() / ranks.len() as f64;
        }
        s
    }

    /// User-weighted combination of disjoint groups.
    pub fn combine(parts: &[MetricsSummary]) -> Self {
        let users: usize = parts.iter().map(|p| p.users).sum();
        let mut s = Self {
            users,
            ..Default::default()
        };
        if users == 0 {
            return s;
        }
        for p in parts {
            let w = p.users as f64 / users as f64;
            for j in 0..3 {
                s.hr[j] += w * p.hr[j];
                s.ndcg[j] += w * p.ndcg[j];
            }
        }
        s
    }

    /// Value of `metric`; only cutoffs 5, 10 and 20 are stored.
    pub fn get(&self, metric: Metric) -> Option<f64> {
        let (k, table) = match metric {
            Metric::Hr(k) => (k, &self.hr),
            Metric::Ndcg(k) => (k, &self.ndcg),
        };
        CUTOFFS.iter().position(|&c| c == k).map(|j| table[j])
    }

    /// Columns in the order H@5, N@5, H@10, N@10, H@20, N@20.
    pub fn columns(&self) -> [f64; 6] {
        [
            self.hr[0],
            self.ndcg[0],
            self.hr[1],
            self.ndcg[1],
            self.hr[2],
            self.ndcg[2],
        ]
    }
}

pub const COLUMN_NAMES: [&str; 6] = ["H@5", "N@5", "H@10", "N@10", "H@20", "N@20"];
