use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ndcg_at_k;

/// Reward granted when the NDCG delta clears `threshold` (strictly when
/// `strict`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub threshold: f64,
    #[serde(default)]
    pub strict: bool,
    pub reward: f64,
}

impl Tier {
    fn admits(&self, delta: f64) -> bool {
        if self.strict {
            delta > self.threshold
        } else {
            delta >= self.threshold
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Cutoff of the NDCG delta driving the macro reward.
    pub k: usize,
    /// Checked in order; the first admitting tier wins.
    pub tiers: Vec<Tier>,
    /// Reward when no tier admits the delta.
    pub below_tiers: f64,
    pub rank_norm: f64,
    pub rank_clip: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.8,
            k: 10,
            tiers: vec![
                Tier { threshold: 0.1, strict: false, reward: 2.0 },
                Tier { threshold: 0.0, strict: true, reward: 1.0 },
                Tier { threshold: 0.0, strict: false, reward: 0.0 },
            ],
            below_tiers: -1.0,
            rank_norm: 100.0,
            rank_clip: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return Err(Error::Config("reward weights need alpha, beta >= 0 and alpha + beta > 0".into()));
        }
        if self.k == 0 || !(self.rank_norm > 0.0) || !(self.rank_clip > 0.0) {
            return Err(Error::Config("reward k, rank_norm and rank_clip must be positive".into()));
        }
        // a strict tier sits just above a non-strict one at the same threshold
        let key = |t: &Tier| (t.threshold, t.strict);
        for w in self.tiers.windows(2) {
            let (a, b) = (key(&w[0]), key(&w[1]));
            if !(a.0 > b.0 || (a.0 == b.0 && a.1 && !b.1)) {
                return Err(Error::Config("reward tiers must be strictly decreasing".into()));
            }
        }
        Ok(())
    }

    pub fn macro_reward(&self, rank_base: usize, rank_aug: usize) -> f64 {
        macro_reward(rank_base, rank_aug, self.k, &self.tiers, self.below_tiers)
    }

    pub fn rank_reward(&self, rank_base: usize, rank_aug: usize) -> f64 {
        rank_reward(rank_base, rank_aug, self.rank_norm, self.rank_clip)
    }

    pub fn reward(&self, rank_base: usize, rank_aug: usize) -> f64 {
        combined_reward(
            self.macro_reward(rank_base, rank_aug),
            self.rank_reward(rank_base, rank_aug),
            self.alpha,
            self.beta,
        )
    }
}

pub fn macro_reward(rank_base: usize, rank_aug: usize, k: usize, tiers: &[Tier], below: f64) -> f64 {
    let delta = ndcg_at_k(rank_aug, k) - ndcg_at_k(rank_base, k);
    tiers
        .iter()
        .find(|t| t.admits(delta))
        .map_or(below, |t| t.reward)
}

pub fn rank_reward(rank_base: usize, rank_aug: usize, norm: f64, clip: f64) -> f64 {
    ((rank_base as f64 - rank_aug as f64) / norm).clamp(-clip, clip)
}

pub fn combined_reward(r_macro: f64, r_rank: f64, alpha: f64, beta: f64) -> f64 {
    alpha * r_macro + beta * r_rank
}
