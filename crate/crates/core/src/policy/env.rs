use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::PolicyNet;
use super::ppo::{argmax, PolicyEnv};
use super::reward::RewardConfig;
use super::state::build_state;
use crate::augment::{AugAction, Augmenter};
use crate::data::{EvalTarget, InteractionDataset, LooSplit};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;
use crate::tta::{run_strategy, tta_predict, RankingReport, TtaConfig};

/// Operator sets for the action-space ablation. Identity is always index 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum ActionPreset {
    Five,
    Six,
    Seven,
    Eight,
}

impl ActionPreset {
    pub fn size(self) -> usize {
        match self {
            Self::Five => 5,
            Self::Six => 6,
            Self::Seven => 7,
            Self::Eight => 8,
        }
    }

    pub fn actions(self) -> Vec<AugAction> {
        use AugAction::*;
        let mut a = vec![Identity, Crop, Reorder, Mask, Substitute, Insert];
        let extra = [TMaskR, TMaskB, TNoise];
        a.extend_from_slice(&extra[..self.size() - 5]);
        a
    }
}

impl Default for ActionPreset {
    fn default() -> Self {
        Self::Eight
    }
}

impl TryFrom<usize> for ActionPreset {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        match n {
            5 => Ok(Self::Five),
            6 => Ok(Self::Six),
            7 => Ok(Self::Seven),
            8 => Ok(Self::Eight),
            _ => Err(Error::Config(format!("action preset must be 5..=8, got {n}"))),
        }
    }
}

impl From<ActionPreset> for usize {
    fn from(p: ActionPreset) -> usize {
        p.size()
    }
}

/// Per-user decision problem over a fixed action list. Every `(user, action)`
/// rank is computed up front; keyed views make them deterministic, so the
/// table is exactly what on-line evaluation would produce.
pub struct RecommendationEnv {
    pub actions: Vec<AugAction>,
    pub reward: RewardConfig,
    pub states: Vec<Vec<f64>>,
    /// Rank under Identity.
    pub base_ranks: Vec<usize>,
    /// `ranks[ctx][a]`.
    pub ranks: Vec<Vec<usize>>,
}

impl RecommendationEnv {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        aug: &Augmenter,
        splits: &[LooSplit],
        which: EvalTarget,
        actions: &[AugAction],
        tta: &TtaConfig,
        reward: &RewardConfig,
        popularity: &[f64],
    ) -> Result<Self> {
        reward.validate()?;
        if splits.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let rows = splits
            .par_iter()
            .map(|sp| {
                let (input, target) = sp.input_and_target(which);
                let state = build_state(aug.backbone, &input, popularity)?.to_vec();
                let base = tta_predict(aug, &input, target, sp.user, AugAction::Identity, tta)?.rank;
                let ranks = actions
                    .iter()
                    .map(|&a| {
                        if a == AugAction::Identity {
                            Ok(base)
                        } else {
                            Ok(tta_predict(aug, &input, target, sp.user, a, tta)?.rank)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((state, base, ranks))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut env = Self {
            actions: actions.to_vec(),
            reward: reward.clone(),
            states: Vec::with_capacity(rows.len()),
            base_ranks: Vec::with_capacity(rows.len()),
            ranks: Vec::with_capacity(rows.len()),
        };
        for (s, b, r) in rows {
            env.states.push(s);
            env.base_ranks.push(b);
            env.ranks.push(r);
        }
        Ok(env)
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }
}

impl PolicyEnv for RecommendationEnv {
    fn num_contexts(&self) -> usize {
        self.states.len()
    }

    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    fn state(&self, ctx: usize) -> &[f64] {
        &self.states[ctx]
    }

    fn reward(&self, ctx: usize, action: usize) -> Result<f64> {
        let rank = *self.ranks[ctx]
            .get(action)
            .ok_or_else(|| Error::dim(format!("action index {action} out of range")))?;
        Ok(self.reward.reward(self.base_ranks[ctx], rank))
    }
}

/// A trained policy with the action list it indexes into.
#[derive(Clone, Debug)]
pub struct TrainedPolicy {
    pub net: PolicyNet,
    pub preset: ActionPreset,
    pub reward: RewardConfig,
}

impl TrainedPolicy {
    pub fn actions(&self) -> Vec<AugAction> {
        self.preset.actions()
    }

    /// Greedy operator for an input sequence.
    pub fn choose(&self, aug: &Augmenter, seq: &[usize], popularity: &[f64]) -> Result<AugAction> {
        let state = build_state(aug.backbone, seq, popularity)?.to_vec();
        let (p, _) = self.net.evaluate(&state)?;
        Ok(self.actions()[argmax(&p)])
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        Ok(self
            .net
            .to_checkpoint()
            .with_meta("action_preset", self.preset.size())
            .with_meta("reward", serde_json::to_string(&self.reward)?))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let net = PolicyNet::from_checkpoint(ck)?;
        let preset = ActionPreset::try_from(ck.meta_parse::<usize>("action_preset")?)?;
        let reward: RewardConfig = serde_json::from_str(ck.meta("reward")?)?;
        if net.num_actions() != preset.actions().len() {
            return Err(Error::Format("policy head does not match its action preset".into()));
        }
        Ok(Self { net, preset, reward })
    }
}

/// Evaluates the greedy policy: one operator per user, chosen from the
/// state of the evaluation input.
pub fn run_adaptive_strategy(
    aug: &Augmenter,
    ds: &InteractionDataset,
    splits: &[LooSplit],
    which: EvalTarget,
    cfg: &TtaConfig,
    policy: &TrainedPolicy,
    popularity: &[f64],
) -> Result<RankingReport> {
    run_strategy(aug, ds, splits, which, cfg, "adaptive", |_, input| {
        policy.choose(aug, input, popularity)
    })
}
