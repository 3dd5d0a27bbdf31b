//! Test-time augmentation: `m` views through the frozen backbone, averaged
//! into one score vector, ranked over the full item set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{AugAction, Augmenter};
use crate::data::{EvalTarget, InteractionDataset, ItemIdx, LooSplit};
use crate::error::{Error, Result};
use crate::metrics::{target_rank, MetricsSummary};
use crate::nn::softmax;
use crate::rng::StreamKey;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtaConfig {
    /// Number of augmented views per sequence.
    pub m: usize,
    pub seed: u64,
    /// Average per-view softmax probabilities instead of raw scores.
    pub average_probabilities: bool,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self {
            m: 10,
            seed: 42,
            average_probabilities: false,
        }
    }
}

impl TtaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("TTA needs m >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingResult {
    pub scores: Vec<f64>,
    pub target: ItemIdx,
    pub rank: usize,
}

/// Running mean over the finite entries; stays bit-exact when every view
/// produces the same vector.
#[derive(Clone, Debug, Default)]
pub struct ScoreAverager {
    mean: Vec<f64>,
    count: usize,
}

impl ScoreAverager {
    pub fn push(&mut self, scores: &[f64]) {
        self.count += 1;
        if self.count == 1 {
            self.mean = scores.to_vec();
            return;
        }
        let k = self.count as f64;
        for (m, &s) in self.mean.iter_mut().zip(scores) {
            if m.is_finite() {
                *m += (s - *m) / k;
            }
        }
    }

    pub fn finish(self) -> Vec<f64> {
        self.mean
    }
}

/// Aggregated scores of `seq` under `action`. Identity is a single plain
/// forward pass; other actions average `cfg.m` views keyed by `(seed, user, view)`.
pub fn tta_scores(
    aug: &Augmenter,
    seq: &[ItemIdx],
    user: usize,
    action: AugAction,
    cfg: &TtaConfig,
) -> Result<Vec<f64>> {
    if action == AugAction::Identity {
        return aug.backbone.scores_for(seq);
    }
    cfg.validate()?;
    let mut avg = ScoreAverager::default();
    for v in 0..cfg.m {
        let view = aug.apply_keyed(seq, action, StreamKey::view(cfg.seed, user, v))?;
        let scores = aug.score_view(&view)?;
        if cfg.average_probabilities {
            avg.push(&softmax(&scores));
        } else {
            avg.push(&scores);
        }
    }
    let mut out = avg.finish();
    if cfg.average_probabilities {
        let last = out.len() - 1;
        out[0] = f64::NEG_INFINITY;
        out[last] = f64::NEG_INFINITY;
    }
    Ok(out)
}

pub fn tta_predict(
    aug: &Augmenter,
    seq: &[ItemIdx],
    target: ItemIdx,
    user: usize,
    action: AugAction,
    cfg: &TtaConfig,
) -> Result<RankingResult> {
    if target == 0 || target > aug.backbone.num_items() {
        return Err(Error::ItemOutOfRange {
            item: target,
            num_items: aug.backbone.num_items(),
        });
    }
    let scores = tta_scores(aug, seq, user, action, cfg)?;
    if scores[1..scores.len() - 1].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("scores for user {user} under {action}")));
    }
    let rank = target_rank(&scores, target);
    Ok(RankingResult {
        scores,
        target,
        rank,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRank {
    pub user: usize,
    pub user_id: String,
    pub action: AugAction,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// Strategy name (`identity`, `crop`, ..., or `adaptive`).
    pub strategy: String,
    pub target: EvalTarget,
    pub rows: Vec<UserRank>,
    pub summary: MetricsSummary,
}

impl RankingReport {
    pub fn new(strategy: impl Into<String>, target: EvalTarget, rows: Vec<UserRank>) -> Self {
        let ranks: Vec<usize> = rows.iter().map(|r| r.rank).collect();
        Self {
            strategy: strategy.into(),
            target,
            summary: MetricsSummary::from_ranks(&ranks),
            rows,
        }
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.rank).collect()
    }
}

/// Evaluates every split with per-user actions chosen by `choose`.
pub fn run_strategy<F>(
    aug: &Augmenter,
    ds: &InteractionDataset,
    splits: &[LooSplit],
    which: EvalTarget,
    cfg: &TtaConfig,
    strategy: &str,
    choose: F,
) -> Result<RankingReport>
where
    F: Fn(&LooSplit, &[ItemIdx]) -> Result<AugAction> + Sync,
{
    let rows = splits
        .par_iter()
        .map(|sp| {
            let (input, target) = sp.input_and_target(which);
            let action = choose(sp, &input)?;
            let r = tta_predict(aug, &input, target, sp.user, action, cfg)?;
            Ok(UserRank {
                user: sp.user,
                user_id: ds.user_id(sp.user).to_string(),
                action,
                rank: r.rank,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankingReport::new(strategy, which, rows))
}

/// Applies `action` uniformly to every evaluation user.
pub fn run_fixed_strategy(
    aug: &Augmenter,
    ds: &InteractionDataset,
    splits: &[LooSplit],
    which: EvalTarget,
    action: AugAction,
    cfg: &TtaConfig,
) -> Result<RankingReport> {
    run_strategy(aug, ds, splits, which, cfg, action.name(), |_, _| Ok(action))
}
