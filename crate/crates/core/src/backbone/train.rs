use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Backbone, BackboneConfig};
use crate::data::{split_leave_one_out, InteractionDataset, ItemIdx};
use crate::error::{Error, Result};
use crate::nn::{softmax_xent, AdamConfig, Grads, Tensor2D};
use crate::rng::{domain, keyed_rng};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-target loss of the freshly initialized model.
    pub initial_loss: f64,
    /// Mean per-target loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains on every user's leave-one-out training prefix.
pub fn train_backbone(ds: &InteractionDataset, cfg: &BackboneConfig) -> Result<(Backbone, TrainReport)> {
    let split = split_leave_one_out(ds);
    let seqs: Vec<Vec<ItemIdx>> = split.splits.into_iter().map(|s| s.train_prefix).collect();
    train_on_sequences(&seqs, ds.num_items(), cfg)
}

/// Next-item training with a full softmax: every position of every sequence
/// predicts its successor. Because both encoders are causal this equals
/// training the final position on every prefix.
pub fn train_on_sequences(
    seqs: &[Vec<ItemIdx>],
    num_items: usize,
    cfg: &BackboneConfig,
) -> Result<(Backbone, TrainReport)> {
    let mut model = Backbone::new(cfg, num_items)?;
    let samples: Vec<&[ItemIdx]> = seqs
        .iter()
        .filter(|s| s.len() >= 2)
        .map(|s| &s[s.len().saturating_sub(cfg.max_len + 1)..])
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let initial = samples
        .par_iter()
        .map(|s| sample_loss(&model, s))
        .collect::<Result<Vec<_>>>()?;
    let targets: usize = initial.iter().map(|(_, n)| n).sum();
    let initial_loss = initial.iter().map(|(l, _)| l).sum::<f64>() / targets as f64;

    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = keyed_rng(cfg.rng_seed, domain::SHUFFLE, epoch as u64, 0);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_count) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let parts = batch
                .par_iter()
                .map(|&i| sample_grad(&model, samples[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut total = Grads::zeros_like(model.params());
            let mut count = 0;
            for (loss, n, g) in &parts {
                epoch_loss += loss;
                count += n;
                total.merge(g);
            }
            epoch_count += count;
            total.scale(1.0 / count as f64);
            let store = model.params_mut();
            store.zero_grad();
            store.accumulate(&total);
            store.adam_step(&adam)?;
        }
        let mean = epoch_loss / epoch_count as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite(format!("backbone loss at epoch {epoch}")));
        }
        epoch_losses.push(mean);
    }
    Ok((
        model,
        TrainReport {
            initial_loss,
            epoch_losses,
        },
    ))
}

fn item_logits(table: &Tensor2D, h: &[f64], num_items: usize) -> Vec<f64> {
    (1..=num_items)
        .map(|i| crate::nn::tensor::dot(table.row(i), h))
        .collect()
}

fn sample_loss(model: &Backbone, seq: &[ItemIdx]) -> Result<(f64, usize)> {
    let input = &seq[..seq.len() - 1];
    let h = model.encode(input)?;
    let table = model.embedding_table();
    let mut loss = 0.0;
    for t in 0..input.len() {
        let logits = item_logits(table, h.row(t), model.num_items());
        loss += softmax_xent(&logits, seq[t + 1] - 1)?.loss;
    }
    Ok((loss, input.len()))
}

/// Summed loss, number of targets and gradients for one sequence.
fn sample_grad(model: &Backbone, seq: &[ItemIdx]) -> Result<(f64, usize, Grads)> {
    let input = &seq[..seq.len() - 1];
    let reps = model.embed(input)?;
    let (h, cache) = model.encode_cached(&reps)?;
    let table = model.embedding_table();
    let n = model.num_items();
    let d = model.embed_dim();
    let mut grads = Grads::zeros_like(model.params());
    let mut d_hidden = Tensor2D::zeros(input.len(), d);
    let mut loss = 0.0;
    {
        let g_table = grads.get_mut(model.item_emb);
        for t in 0..input.len() {
            let ht = h.row(t);
            let out = softmax_xent(&item_logits(table, ht, n), seq[t + 1] - 1)?;
            loss += out.loss;
            let dh = d_hidden.row_mut(t);
            for (k, &g) in out.grad.iter().enumerate() {
                let item = k + 1;
                dh.iter_mut().zip(table.row(item)).for_each(|(a, e)| *a += g * e);
                g_table.row_mut(item).iter_mut().zip(ht).for_each(|(a, hv)| *a += g * hv);
            }
        }
    }
    let d_reps = model.encode_backward(&cache, &d_hidden, &mut grads)?;
    let g_table = grads.get_mut(model.item_emb);
    for (j, &item) in input.iter().enumerate() {
        g_table
            .row_mut(item)
            .iter_mut()
            .zip(d_reps.row(j))
            .for_each(|(a, v)| *a += v);
    }
    Ok((loss, input.len(), grads))
}
