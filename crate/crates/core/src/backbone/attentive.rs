//! One causal self-attention block: learned positions, attention with
//! residual, layer norm, position-wise feed-forward with residual, layer norm.

use rand::Rng;

use crate::error::Result;
use crate::nn::{
    affine_backward, affine_forward, causal_attention_backward, causal_attention_forward,
    layer_norm_backward, layer_norm_forward, relu, relu_backward, AttentionCache,
    AttentionWeights, Grads, LayerNormCache, ParamId, ParamStore, Tensor2D,
};

#[derive(Clone, Debug)]
pub(crate) struct AttentiveBlock {
    max_len: usize,
    pos: ParamId,
    w_q: ParamId,
    w_k: ParamId,
    w_v: ParamId,
    ln1_gain: ParamId,
    ln1_bias: ParamId,
    ff_w1: ParamId,
    ff_b1: ParamId,
    ff_w2: ParamId,
    ff_b2: ParamId,
    ln2_gain: ParamId,
    ln2_bias: ParamId,
}

pub(crate) struct AttentiveCache {
    attn: AttentionCache,
    ln1: LayerNormCache,
    h1: Tensor2D,
    relu_out: Tensor2D,
    ln2: LayerNormCache,
}

impl AttentiveBlock {
    pub fn new<R: Rng>(store: &mut ParamStore, d: usize, max_len: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let pos = store.add_uniform("attn.position", max_len, d, bound, rng);
        let w_q = store.add_uniform("attn.w_q", d, d, bound, rng);
        let w_k = store.add_uniform("attn.w_k", d, d, bound, rng);
        let w_v = store.add_uniform("attn.w_v", d, d, bound, rng);
        let ln1_gain = store.add("attn.ln1_gain", Tensor2D::row_vector(&vec![1.0; d]));
        let ln1_bias = store.add("attn.ln1_bias", Tensor2D::zeros(1, d));
        let ff_w1 = store.add_uniform("attn.ff_w1", d, d, bound, rng);
        let ff_b1 = store.add("attn.ff_b1", Tensor2D::zeros(1, d));
        let ff_w2 = store.add_uniform("attn.ff_w2", d, d, bound, rng);
        let ff_b2 = store.add("attn.ff_b2", Tensor2D::zeros(1, d));
        let ln2_gain = store.add("attn.ln2_gain", Tensor2D::row_vector(&vec![1.0; d]));
        let ln2_bias = store.add("attn.ln2_bias", Tensor2D::zeros(1, d));
        Self {
            max_len,
            pos,
            w_q,
            w_k,
            w_v,
            ln1_gain,
            ln1_bias,
            ff_w1,
            ff_b1,
            ff_w2,
            ff_b2,
            ln2_gain,
            ln2_bias,
        }
    }

    fn attention<'a>(&self, store: &'a ParamStore) -> AttentionWeights<'a> {
        AttentionWeights {
            w_q: store.get(self.w_q),
            w_k: store.get(self.w_k),
            w_v: store.get(self.w_v),
        }
    }

    /// Positions are right-aligned: the last row always gets position `max_len − 1`.
    fn first_position(&self, len: usize) -> usize {
        self.max_len - len
    }

    pub fn forward(&self, store: &ParamStore, reps: &Tensor2D) -> Result<(Tensor2D, AttentiveCache)> {
        let t = reps.rows();
        let pos = store.get(self.pos);
        let offset = self.first_position(t);
        let mut x0 = reps.clone();
        for j in 0..t {
            x0.row_mut(j)
                .iter_mut()
                .zip(pos.row(offset + j))
                .for_each(|(a, p)| *a += p);
        }
        let (a1, attn) = causal_attention_forward(&x0, &self.attention(store))?;
        let (h1, ln1) = layer_norm_forward(&a1, store.get(self.ln1_gain), store.get(self.ln1_bias))?;
        let z1 = affine_forward(&h1, store.get(self.ff_w1), store.get(self.ff_b1))?;
        let relu_out = relu(&z1);
        let z2 = affine_forward(&relu_out, store.get(self.ff_w2), store.get(self.ff_b2))?;
        let f = h1.add(&z2)?;
        let (h, ln2) = layer_norm_forward(&f, store.get(self.ln2_gain), store.get(self.ln2_bias))?;
        Ok((
            h,
            AttentiveCache {
                attn,
                ln1,
                h1,
                relu_out,
                ln2,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &AttentiveCache,
        d_hidden: &Tensor2D,
        grads: &mut Grads,
    ) -> Result<Tensor2D> {
        let (d_f, dg2, db2) = layer_norm_backward(&cache.ln2, d_hidden, store.get(self.ln2_gain));
        grads.add(self.ln2_gain, &dg2)?;
        grads.add(self.ln2_bias, &db2)?;

        let ff2 = affine_backward(&cache.relu_out, store.get(self.ff_w2), &d_f)?;
        grads.add(self.ff_w2, &ff2.dw)?;
        grads.add(self.ff_b2, &ff2.db)?;
        let d_z1 = relu_backward(&cache.relu_out, &ff2.dx);
        let ff1 = affine_backward(&cache.h1, store.get(self.ff_w1), &d_z1)?;
        grads.add(self.ff_w1, &ff1.dw)?;
        grads.add(self.ff_b1, &ff1.db)?;
        let mut d_h1 = d_f;
        d_h1.add_assign(&ff1.dx)?;

        let (d_a1, dg1, db1) = layer_norm_backward(&cache.ln1, &d_h1, store.get(self.ln1_gain));
        grads.add(self.ln1_gain, &dg1)?;
        grads.add(self.ln1_bias, &db1)?;

        let w = self.attention(store);
        let (d_x0, ag) = causal_attention_backward(&cache.attn, &d_a1, &w)?;
        grads.add(self.w_q, &ag.w_q)?;
        grads.add(self.w_k, &ag.w_k)?;
        grads.add(self.w_v, &ag.w_v)?;

        let offset = self.first_position(d_x0.rows());
        let g_pos = grads.get_mut(self.pos);
        for j in 0..d_x0.rows() {
            g_pos
                .row_mut(offset + j)
                .iter_mut()
                .zip(d_x0.row(j))
                .for_each(|(g, v)| *g += v);
        }
        Ok(d_x0)
    }
}
