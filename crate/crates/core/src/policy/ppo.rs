use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::PolicyNet;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Grads, Tensor2D};
use crate::rng::{domain, keyed_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    /// Transitions collected per update.
    pub batch_size: usize,
    pub clip_eps: f64,
    pub value_coef: f64,
    /// Initial (or fixed) entropy coefficient.
    pub entropy_coef: f64,
    pub entropy_min: f64,
    pub dynamic_entropy: bool,
    /// Kept for completeness; one-step episodes make it inert.
    pub gamma: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub lr: f64,
    pub grad_clip: f64,
    pub total_steps: usize,
    pub hidden: usize,
    pub normalize_advantages: bool,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            clip_eps: 0.2,
            value_coef: 0.25,
            entropy_coef: 0.09,
            entropy_min: 0.01,
            dynamic_entropy: true,
            gamma: 0.96,
            epochs: 4,
            minibatch_size: 128,
            lr: 1e-3,
            grad_clip: 1.0,
            total_steps: 51_200,
            hidden: super::net::DEFAULT_HIDDEN,
            normalize_advantages: true,
            seed: 42,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.epochs == 0 || self.hidden == 0 {
            return bad("batch sizes, epochs and hidden width must be >= 1");
        }
        if !(self.lr > 0.0) || !(self.grad_clip > 0.0) {
            return bad("lr and grad_clip must be positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.entropy_min < 0.0 {
            return bad("loss coefficients must be non-negative");
        }
        Ok(())
    }

    pub fn num_updates(&self) -> usize {
        self.total_steps.div_ceil(self.batch_size).max(1)
    }
}

/// Entropy coefficient for an update: linear decay from `entropy_coef` to
/// `entropy_min`, doubled (up to `entropy_coef`) while the policy entropy is
/// below half its maximum.
pub fn dynamic_entropy(step: usize, total_steps: usize, entropy: f64, num_actions: usize, cfg: &PpoConfig) -> f64 {
    if !cfg.dynamic_entropy {
        return cfg.entropy_coef;
    }
    let progress = if total_steps == 0 {
        1.0
    } else {
        (step as f64 / total_steps as f64).min(1.0)
    };
    let c2 = cfg.entropy_min.max(cfg.entropy_coef * (1.0 - progress));
    if entropy < 0.5 * (num_actions as f64).ln() {
        (2.0 * c2).min(cfg.entropy_coef.max(c2))
    } else {
        c2
    }
}

/// One-step decision problem the policy is trained on.
pub trait PolicyEnv: Sync {
    fn num_contexts(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn state(&self, ctx: usize) -> &[f64];
    fn reward(&self, ctx: usize, action: usize) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub context: usize,
    pub state: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub ret: f64,
    pub advantage: f64,
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn sample_index<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let mut u = rng.gen::<f64>();
    for (i, &x) in p.iter().enumerate() {
        u -= x;
        if u < 0.0 {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Samples `batch_size` contexts and actions under the current policy
/// (frozen for the whole batch) and scores them. Returns are the rewards;
/// advantages are `reward − value`.
pub fn collect_rollout<E: PolicyEnv>(net: &PolicyNet, env: &E, batch_size: usize, seed: u64, update: usize) -> Result<Vec<Transition>> {
    let n = env.num_contexts();
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut rng = keyed_rng(seed, domain::ROLLOUT, update as u64, 0);
    let contexts: Vec<usize> = (0..batch_size).map(|_| rng.gen_range(0..n)).collect();
    let x = Tensor2D::from_rows(&contexts.iter().map(|&c| env.state(c).to_vec()).collect::<Vec<_>>())?;
    let (out, _) = net.forward(&x)?;
    let mut batch: Vec<Transition> = contexts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let p = out.probs(i);
            let a = sample_index(&p, &mut rng);
            Transition {
                context: c,
                state: x.row(i).to_vec(),
                action: a,
                log_prob: out.log_probs(i)[a],
                value: out.values[i],
                reward: 0.0,
                ret: 0.0,
                advantage: 0.0,
            }
        })
        .collect();
    batch.par_iter_mut().try_for_each(|t| -> Result<()> {
        t.reward = env.reward(t.context, t.action)?;
        t.ret = t.reward;
        t.advantage = t.reward - t.value;
        Ok(())
    })?;
    Ok(batch)
}

/// Rescales advantages to zero mean and unit variance (left centered when
/// the variance vanishes).
pub fn normalize_advantages(batch: &mut [Transition]) {
    let n = batch.len() as f64;
    if batch.is_empty() {
        return;
    }
    let mean = batch.iter().map(|t| t.advantage).sum::<f64>() / n;
    let var = batch.iter().map(|t| (t.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for t in batch.iter_mut() {
        t.advantage -= mean;
        if std > 1e-8 {
            t.advantage /= std;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Clipped-surrogate loss `−E[min(ρA, clip(ρ)A)] + c1·E[(V−R)²] − c2·E[H]`
/// over `batch` and its gradient w.r.t. every network parameter.
pub fn ppo_loss(net: &PolicyNet, batch: &[&Transition], clip_eps: f64, value_coef: f64, c2: f64) -> Result<(LossParts, Grads)> {
    if batch.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let m = batch.len() as f64;
    let x = Tensor2D::from_rows(&batch.iter().map(|t| t.state.clone()).collect::<Vec<_>>())?;
    let (out, cache) = net.forward(&x)?;
    let na = net.num_actions();
    let mut dlogits = Tensor2D::zeros(batch.len(), na);
    let mut dvalues = vec![0.0; batch.len()];
    let mut parts = LossParts::default();
    for (i, t) in batch.iter().enumerate() {
        let p = out.probs(i);
        let logp = out.log_probs(i);
        let ratio = (logp[t.action] - t.log_prob).exp();
        let unclipped = ratio * t.advantage;
        let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * t.advantage;
        let h = entropy(&p);
        parts.policy -= unclipped.min(clipped) / m;
        parts.entropy += h / m;
        parts.approx_kl += (t.log_prob - logp[t.action]) / m;
        if (ratio - 1.0).abs() > clip_eps {
            parts.clip_fraction += 1.0 / m;
        }
        let dv = out.values[i] - t.ret;
        parts.value += dv * dv / m;
        dvalues[i] = value_coef * 2.0 * dv / m;

        let surrogate_active = unclipped <= clipped;
        let row = dlogits.row_mut(i);
        for j in 0..na {
            let onehot = if j == t.action { 1.0 } else { 0.0 };
            let mut g = 0.0;
            if surrogate_active {
                g -= t.advantage * ratio * (onehot - p[j]) / m;
            }
            // dH/dlogit_j = −p_j (log p_j + H)
            let log_pj = if p[j] > 0.0 { logp[j] } else { 0.0 };
            g += c2 * p[j] * (log_pj + h) / m;
            row[j] = g;
        }
    }
    parts.total = parts.policy + value_coef * parts.value - c2 * parts.entropy;
    let grads = net.backward(&cache, &dlogits, &dvalues)?;
    Ok((parts, grads))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub loss: LossParts,
    pub grad_norm: f64,
    pub c2: f64,
    /// Every transition in the batch took the same action.
    pub degenerate: bool,
}

/// `cfg.epochs` passes of shuffled minibatches over `batch`, one Adam step each.
pub fn ppo_update(net: &mut PolicyNet, batch: &mut [Transition], cfg: &PpoConfig, c2: f64, update: usize) -> Result<UpdateDiagnostics> {
    if batch.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if cfg.normalize_advantages {
        normalize_advantages(batch);
    }
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut rng = keyed_rng(cfg.seed, domain::SHUFFLE, update as u64, 0x9090);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut diag = UpdateDiagnostics {
        c2,
        degenerate: batch.iter().all(|t| t.action == batch[0].action),
        ..Default::default()
    };
    let mut steps = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let mb: Vec<&Transition> = chunk.iter().map(|&i| &batch[i]).collect();
            let (parts, grads) = ppo_loss(net, &mb, cfg.clip_eps, cfg.value_coef, c2)?;
            let store = net.params_mut();
            store.zero_grad();
            store.accumulate(&grads);
            diag.grad_norm += store.clip_global_norm(cfg.grad_clip);
            store.adam_step(&adam)?;
            diag.loss.total += parts.total;
            diag.loss.policy += parts.policy;
            diag.loss.value += parts.value;
            diag.loss.entropy += parts.entropy;
            diag.loss.approx_kl += parts.approx_kl;
            diag.loss.clip_fraction += parts.clip_fraction;
            steps += 1.0;
        }
    }
    let l = &mut diag.loss;
    for v in [&mut l.total, &mut l.policy, &mut l.value, &mut l.entropy, &mut l.approx_kl, &mut l.clip_fraction] {
        *v /= steps;
    }
    diag.grad_norm /= steps;
    Ok(diag)
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub update: usize,
    pub env_steps: usize,
    pub mean_reward: f64,
    pub entropy: f64,
    pub c2: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub degenerate: bool,
}

/// Full training loop: rollout under a frozen snapshot, then update.
pub fn train_policy<E: PolicyEnv>(
    net: &mut PolicyNet,
    env: &E,
    cfg: &PpoConfig,
    mut on_update: impl FnMut(&TrainLogRecord),
) -> Result<Vec<TrainLogRecord>> {
    cfg.validate()?;
    if env.num_actions() != net.num_actions() {
        return Err(Error::dim(format!(
            "environment has {} actions, policy {}",
            env.num_actions(),
            net.num_actions()
        )));
    }
    let updates = cfg.num_updates();
    let mut log = Vec::with_capacity(updates);
    for u in 0..updates {
        let mut batch = collect_rollout(net, env, cfg.batch_size, cfg.seed, u)?;
        let mean_reward = batch.iter().map(|t| t.reward).sum::<f64>() / batch.len() as f64;
        let x = Tensor2D::from_rows(&batch.iter().map(|t| t.state.clone()).collect::<Vec<_>>())?;
        let (out, _) = net.forward(&x)?;
        let h = (0..batch.len()).map(|i| entropy(&out.probs(i))).sum::<f64>() / batch.len() as f64;
        let env_steps = u * cfg.batch_size;
        let c2 = dynamic_entropy(env_steps, cfg.total_steps, h, net.num_actions(), cfg);
        let d = ppo_update(net, &mut batch, cfg, c2, u)?;
        let rec = TrainLogRecord {
            update: u,
            env_steps: env_steps + cfg.batch_size,
            mean_reward,
            entropy: h,
            c2,
            policy_loss: d.loss.policy,
            value_loss: d.loss.value,
            approx_kl: d.loss.approx_kl,
            clip_fraction: d.loss.clip_fraction,
            grad_norm: d.grad_norm,
            degenerate: d.degenerate,
        };
        on_update(&rec);
        log.push(rec);
    }
    Ok(log)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    Greedy,
    Sample,
}

/// Greedy picks the most probable action (lowest index on ties).
pub fn select_index<R: Rng>(probs: &[f64], mode: SelectMode, rng: &mut R) -> usize {
    match mode {
        SelectMode::Greedy => argmax(probs),
        SelectMode::Sample => sample_index(probs, rng),
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
