//! Pre-trainable next-item recommenders exposing embed / encode / score.
//!
//! Both encoders consume an item-representation matrix, so embedding-space
//! augmentations can be fed through [`Backbone::encode_from`].

mod attentive;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::ItemIdx;
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, GruLayer, GruStep, Grads, ParamId, ParamStore, Tensor2D};
use crate::rng::{domain, keyed_rng};

use attentive::{AttentiveBlock, AttentiveCache};
pub use train::{train_backbone, train_on_sequences, TrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Recurrent,
    Attentive,
}

impl std::fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackboneKind::Recurrent => "recurrent",
            BackboneKind::Attentive => "attentive",
        })
    }
}

impl std::str::FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recurrent" | "gru" | "gru4rec" => Ok(Self::Recurrent),
            "attentive" | "sasrec" => Ok(Self::Attentive),
            _ => Err(Error::Config(format!("unknown backbone kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneConfig {
    pub kind: BackboneKind,
    pub embed_dim: usize,
    pub max_len: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            kind: BackboneKind::Attentive,
            embed_dim: 64,
            max_len: 50,
            lr: 1e-3,
            batch_size: 256,
            epochs: 20,
            rng_seed: 42,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.max_len < 2 || self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::Config(
                "backbone needs embed_dim >= 1, max_len >= 2, batch_size >= 1, lr > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Encoder {
    Recurrent(GruLayer),
    Attentive(AttentiveBlock),
}

pub(crate) enum EncodeCache {
    Recurrent(Vec<GruStep>),
    Attentive(Box<AttentiveCache>),
}

#[derive(Clone, Debug)]
pub struct Backbone {
    kind: BackboneKind,
    embed_dim: usize,
    max_len: usize,
    num_items: usize,
    seed: u64,
    store: ParamStore,
    item_emb: ParamId,
    encoder: Encoder,
}

impl Backbone {
    /// Randomly initialized model over items `1..=num_items`. Padding and
    /// mask rows of the embedding table start (and stay) at zero.
    pub fn new(cfg: &BackboneConfig, num_items: usize) -> Result<Self> {
        cfg.validate()?;
        if num_items == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        let d = cfg.embed_dim;
        let mut rng = keyed_rng(cfg.rng_seed, domain::INIT, 0, 0);
        let mut store = ParamStore::new();
        let bound = 1.0 / (d as f64).sqrt();
        let mut table = Tensor2D::zeros(num_items + 2, d);
        for i in 1..=num_items {
            for v in table.row_mut(i) {
                *v = rng.gen_range(-bound..bound);
            }
        }
        let item_emb = store.add("item_embedding", table);
        let encoder = match cfg.kind {
            BackboneKind::Recurrent => {
                Encoder::Recurrent(GruLayer::new(&mut store, "gru", d, d, &mut rng))
            }
            BackboneKind::Attentive => {
                Encoder::Attentive(AttentiveBlock::new(&mut store, d, cfg.max_len, &mut rng))
            }
        };
        Ok(Self {
            kind: cfg.kind,
            embed_dim: d,
            max_len: cfg.max_len,
            num_items,
            seed: cfg.rng_seed,
            store,
            item_emb,
            encoder,
        })
    }

    pub fn kind(&self) -> BackboneKind {
        self.kind
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn mask_token(&self) -> ItemIdx {
        self.num_items + 1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(num_items + 2) × d`; row 0 is padding, the last row is the mask token.
    pub fn embedding_table(&self) -> &Tensor2D {
        self.store.get(self.item_emb)
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// The most recent `max_len` items of `seq`.
    pub fn truncate<'a>(&self, seq: &'a [ItemIdx]) -> &'a [ItemIdx] {
        &seq[seq.len().saturating_sub(self.max_len)..]
    }

    /// Row `j` of the result is the embedding of `seq[j]` (after truncation).
    pub fn embed(&self, seq: &[ItemIdx]) -> Result<Tensor2D> {
        let seq = self.truncate(seq);
        if seq.is_empty() {
            return Err(Error::dim("cannot embed an empty sequence"));
        }
        for &i in seq {
            if i == 0 || i > self.mask_token() {
                return Err(Error::ItemOutOfRange {
                    item: i,
                    num_items: self.num_items,
                });
            }
        }
        Ok(self.embedding_table().select_rows(seq))
    }

    /// Runs the encoder on a given representation matrix.
    pub fn encode_from(&self, reps: &Tensor2D) -> Result<Tensor2D> {
        Ok(self.encode_cached(reps)?.0)
    }

    pub fn encode(&self, seq: &[ItemIdx]) -> Result<Tensor2D> {
        self.encode_from(&self.embed(seq)?)
    }

    pub(crate) fn encode_cached(&self, reps: &Tensor2D) -> Result<(Tensor2D, EncodeCache)> {
        if reps.cols() != self.embed_dim {
            return Err(Error::dim(format!(
                "representation width {} (expected {})",
                reps.cols(),
                self.embed_dim
            )));
        }
        if reps.rows() == 0 || reps.rows() > self.max_len {
            return Err(Error::dim(format!(
                "representation length {} outside 1..={}",
                reps.rows(),
                self.max_len
            )));
        }
        match &self.encoder {
            Encoder::Recurrent(gru) => {
                let steps = crate::nn::gru_unroll_forward(
                    reps,
                    &vec![0.0; self.embed_dim],
                    &gru.weights(&self.store),
                )?;
                Ok((crate::nn::gru::hidden_states(&steps), EncodeCache::Recurrent(steps)))
            }
            Encoder::Attentive(block) => {
                let (h, cache) = block.forward(&self.store, reps)?;
                Ok((h, EncodeCache::Attentive(Box::new(cache))))
            }
        }
    }

    /// Accumulates encoder gradients and returns ∂L/∂reps.
    pub(crate) fn encode_backward(
        &self,
        cache: &EncodeCache,
        d_hidden: &Tensor2D,
        grads: &mut Grads,
    ) -> Result<Tensor2D> {
        match (&self.encoder, cache) {
            (Encoder::Recurrent(gru), EncodeCache::Recurrent(steps)) => {
                let w = gru.weights(&self.store);
                let mut g = w.zero_grads();
                let (dx, _) = crate::nn::gru_unroll_backward(steps, d_hidden, &w, &mut g);
                gru.add_grads(&g, grads)?;
                Ok(dx)
            }
            (Encoder::Attentive(block), EncodeCache::Attentive(c)) => {
                block.backward(&self.store, c, d_hidden, grads)
            }
            _ => Err(Error::dim("encoder cache does not match the encoder")),
        }
    }

    /// Dot-product score of every item index against `h_last`. Padding and
    /// mask-token entries are −∞.
    pub fn score(&self, h_last: &[f64]) -> Result<Vec<f64>> {
        if h_last.len() != self.embed_dim {
            return Err(Error::dim(format!(
                "hidden state width {} (expected {})",
                h_last.len(),
                self.embed_dim
            )));
        }
        let table = self.embedding_table();
        let mut scores: Vec<f64> = (0..table.rows())
            .map(|i| crate::nn::tensor::dot(table.row(i), h_last))
            .collect();
        scores[0] = f64::NEG_INFINITY;
        scores[self.mask_token()] = f64::NEG_INFINITY;
        Ok(scores)
    }

    pub fn scores_from_representation(&self, reps: &Tensor2D) -> Result<Vec<f64>> {
        let h = self.encode_from(reps)?;
        self.score(h.row(h.rows() - 1))
    }

    pub fn scores_for(&self, seq: &[ItemIdx]) -> Result<Vec<f64>> {
        self.scores_from_representation(&self.embed(seq)?)
    }

    /// Mean of the encoder's hidden states over all positions.
    pub fn mean_hidden(&self, seq: &[ItemIdx]) -> Result<Vec<f64>> {
        Ok(self.encode(seq)?.mean_rows())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_store(&self.store)
            .with_meta("format", "adatta-backbone")
            .with_meta("kind", self.kind)
            .with_meta("embed_dim", self.embed_dim)
            .with_meta("max_len", self.max_len)
            .with_meta("num_items", self.num_items)
            .with_meta("seed", self.seed)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta("format")? != "adatta-backbone" {
            return Err(Error::Format("not a backbone checkpoint".into()));
        }
        let cfg = BackboneConfig {
            kind: ck.meta("kind")?.parse()?,
            embed_dim: ck.meta_parse("embed_dim")?,
            max_len: ck.meta_parse("max_len")?,
            rng_seed: ck.meta_parse("seed")?,
            ..BackboneConfig::default()
        };
        let mut b = Self::new(&cfg, ck.meta_parse("num_items")?)?;
        b.store.load_values(&ck.tensors)?;
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: BackboneKind) -> Backbone {
        let cfg = BackboneConfig {
            kind,
            embed_dim: 8,
            max_len: 6,
            rng_seed: 5,
            ..Default::default()
        };
        Backbone::new(&cfg, 10).unwrap()
    }

    #[test]
    fn embed_rows_are_table_rows() {
        for kind in [BackboneKind::Recurrent, BackboneKind::Attentive] {
            let b = small(kind);
            let e = b.embed(&[3]).unwrap();
            assert_eq!(e.row(0), b.embedding_table().row(3));
            let m = b.embed(&[b.mask_token()]).unwrap();
            assert_eq!(m.row(0), b.embedding_table().row(11));
            let e = b.embed(&[1, 2, 3, 4]).unwrap();
            let p = b.embed(&[3, 1, 4, 2]).unwrap();
            assert_eq!(p.row(0), e.row(2));
            assert_eq!(p.row(3), e.row(1));
        }
    }

    #[test]
    fn embed_validates_and_truncates() {
        let b = small(BackboneKind::Attentive);
        assert!(matches!(b.embed(&[12]), Err(Error::ItemOutOfRange { item: 12, .. })));
        assert!(b.embed(&[0]).is_err());
        assert!(b.embed(&[]).is_err());
        let e = b.embed(&[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert_eq!(e.rows(), 6);
        assert_eq!(e.row(0), b.embedding_table().row(3));
    }

    #[test]
    fn encode_from_embed_is_encode() {
        for kind in [BackboneKind::Recurrent, BackboneKind::Attentive] {
            let b = small(kind);
            let s = [4, 2, 9, 9, 1];
            assert_eq!(b.encode_from(&b.embed(&s).unwrap()).unwrap(), b.encode(&s).unwrap());
            assert!(b.encode_from(&Tensor2D::zeros(2, 7)).is_err());
        }
    }

    #[test]
    fn score_masks_special_rows() {
        let b = small(BackboneKind::Recurrent);
        let s = b.score(&[0.1; 8]).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s[0], f64::NEG_INFINITY);
        assert_eq!(s[11], f64::NEG_INFINITY);
        assert!(s[1..11].iter().all(|v| v.is_finite()));
        assert!(b.score(&[0.1; 3]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        for kind in [BackboneKind::Recurrent, BackboneKind::Attentive] {
            let b = small(kind);
            let ck = Checkpoint::from_bytes(&b.to_checkpoint().to_bytes()).unwrap();
            let r = Backbone::from_checkpoint(&ck).unwrap();
            assert_eq!(r.scores_for(&[1, 5, 7]).unwrap(), b.scores_for(&[1, 5, 7]).unwrap());
        }
    }
}
