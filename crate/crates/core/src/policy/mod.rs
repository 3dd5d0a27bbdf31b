//! Per-sequence operator selection: hybrid state, actor-critic network,
//! tiered reward and PPO training.

mod env;
mod net;
mod ppo;
mod reward;
mod state;

pub use env::{run_adaptive_strategy, ActionPreset, RecommendationEnv, TrainedPolicy};
pub use net::{PolicyCache, PolicyNet, PolicyOutput, DEFAULT_HIDDEN};
pub use ppo::{
    argmax, collect_rollout, dynamic_entropy, entropy, normalize_advantages, ppo_loss, ppo_update,
    select_index, train_policy, LossParts, PolicyEnv, PpoConfig, SelectMode, TrainLogRecord,
    Transition, UpdateDiagnostics,
};
pub use reward::{combined_reward, macro_reward, rank_reward, RewardConfig, Tier};
pub use state::{build_state, stat_features, PolicyState, STAT_FEATURES, STAT_NAMES};
