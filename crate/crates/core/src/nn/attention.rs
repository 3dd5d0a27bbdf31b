//! Single-head causal self-attention with a residual connection, and row-wise
//! layer normalization.

use super::tensor::Tensor2D;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct AttentionWeights<'a> {
    pub w_q: &'a Tensor2D,
    pub w_k: &'a Tensor2D,
    pub w_v: &'a Tensor2D,
}

#[derive(Clone, Debug)]
pub struct AttentionGrads {
    pub w_q: Tensor2D,
    pub w_k: Tensor2D,
    pub w_v: Tensor2D,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    pub x: Tensor2D,
    pub q: Tensor2D,
    pub k: Tensor2D,
    pub v: Tensor2D,
    /// Row-stochastic, lower-triangular attention matrix (T × T).
    pub weights: Tensor2D,
    /// `weights · v`, before the residual is added.
    pub attended: Tensor2D,
}

/// `y = x + softmax(mask(q kᵀ / √d)) v` with `q = x W_q`, `k = x W_k`, `v = x W_v`.
pub fn causal_attention_forward(
    x: &Tensor2D,
    w: &AttentionWeights,
) -> Result<(Tensor2D, AttentionCache)> {
    let t = x.rows();
    if t == 0 {
        return Err(Error::dim("attention over an empty sequence"));
    }
    if w.w_v.cols() != x.cols() {
        return Err(Error::dim(format!(
            "value projection {:?} cannot feed a residual of width {}",
            w.w_v.shape(),
            x.cols()
        )));
    }
    let q = x.matmul(w.w_q)?;
    let k = x.matmul(w.w_k)?;
    let v = x.matmul(w.w_v)?;
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let scores = q.matmul_t(&k)?;
    let mut weights = Tensor2D::zeros(t, t);
    for i in 0..t {
        let row = &scores.row(i)[..=i];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s * scale));
        let out = weights.row_mut(i);
        let mut z = 0.0;
        for j in 0..=i {
            let e = (row[j] * scale - max).exp();
            out[j] = e;
            z += e;
        }
        out[..=i].iter_mut().for_each(|p| *p /= z);
    }
    let attended = weights.matmul(&v)?;
    let y = x.add(&attended)?;
    Ok((
        y,
        AttentionCache {
            x: x.clone(),
            q,
            k,
            v,
            weights,
            attended,
        },
    ))
}

pub fn causal_attention_backward(
    cache: &AttentionCache,
    dy: &Tensor2D,
    w: &AttentionWeights,
) -> Result<(Tensor2D, AttentionGrads)> {
    let t = cache.x.rows();
    if dy.shape() != cache.x.shape() {
        return Err(Error::dim(format!(
            "attention upstream {:?} vs input {:?}",
            dy.shape(),
            cache.x.shape()
        )));
    }
    let scale = 1.0 / (cache.q.cols() as f64).sqrt();
    let d_weights = dy.matmul_t(&cache.v)?;
    let dv = cache.weights.t_matmul(dy)?;
    let mut d_scores = Tensor2D::zeros(t, t);
    for i in 0..t {
        let a = &cache.weights.row(i)[..=i];
        let da = &d_weights.row(i)[..=i];
        let inner: f64 = a.iter().zip(da).map(|(p, g)| p * g).sum();
        let out = d_scores.row_mut(i);
        for j in 0..=i {
            out[j] = a[j] * (da[j] - inner) * scale;
        }
    }
    let dq = d_scores.matmul(&cache.k)?;
    let dk = d_scores.t_matmul(&cache.q)?;

    let grads = AttentionGrads {
        w_q: cache.x.t_matmul(&dq)?,
        w_k: cache.x.t_matmul(&dk)?,
        w_v: cache.x.t_matmul(&dv)?,
    };
    let mut dx = dy.clone();
    dx.add_assign(&dq.matmul_t(w.w_q)?)?;
    dx.add_assign(&dk.matmul_t(w.w_k)?)?;
    dx.add_assign(&dv.matmul_t(w.w_v)?)?;
    Ok((dx, grads))
}

pub const LAYER_NORM_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct LayerNormCache {
    pub normalized: Tensor2D,
    pub inv_std: Vec<f64>,
}

/// Row-wise `(x − μ) / √(σ² + eps) · gain + bias`.
pub fn layer_norm_forward(
    x: &Tensor2D,
    gain: &Tensor2D,
    bias: &Tensor2D,
) -> Result<(Tensor2D, LayerNormCache)> {
    let d = x.cols();
    if gain.shape() != (1, d) || bias.shape() != (1, d) {
        return Err(Error::dim(format!(
            "layer norm params {:?}/{:?} for width {d}",
            gain.shape(),
            bias.shape()
        )));
    }
    let mut normalized = Tensor2D::zeros(x.rows(), d);
    let mut y = Tensor2D::zeros(x.rows(), d);
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(is);
        for c in 0..d {
            let n = (row[c] - mean) * is;
            normalized.set(r, c, n);
            y.set(r, c, n * gain.data()[c] + bias.data()[c]);
        }
    }
    Ok((
        y,
        LayerNormCache {
            normalized,
            inv_std,
        },
    ))
}

/// Returns `(dx, dgain, dbias)`.
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    dy: &Tensor2D,
    gain: &Tensor2D,
) -> (Tensor2D, Tensor2D, Tensor2D) {
    let (rows, d) = dy.shape();
    let mut dx = Tensor2D::zeros(rows, d);
    let mut dgain = Tensor2D::zeros(1, d);
    let dbias = dy.sum_rows();
    let mut dn = vec![0.0; d];
    for r in 0..rows {
        let xhat = cache.normalized.row(r);
        let g = dy.row(r);
        for c in 0..d {
            dgain.data_mut()[c] += g[c] * xhat[c];
            dn[c] = g[c] * gain.data()[c];
        }
        let mean_dn = dn.iter().sum::<f64>() / d as f64;
        let mean_dn_x = dn.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let out = dx.row_mut(r);
        for c in 0..d {
            out[c] = cache.inv_std[r] * (dn[c] - mean_dn - xhat[c] * mean_dn_x);
        }
    }
    (dx, dgain, dbias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Tensor2D {
        let mut rng = crate::rng::keyed_rng(seed, 0, 0, 0);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor2D::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn single_position_attends_to_itself() {
        let x = random(1, 4, 1);
        let (wq, wk, wv) = (random(4, 4, 2), random(4, 4, 3), random(4, 4, 4));
        let w = AttentionWeights {
            w_q: &wq,
            w_k: &wk,
            w_v: &wv,
        };
        let (_, cache) = causal_attention_forward(&x, &w).unwrap();
        assert_eq!(cache.weights.data(), &[1.0]);
        assert_eq!(cache.attended, x.matmul(&wv).unwrap());
    }

    #[test]
    fn weights_are_causal_and_stochastic() {
        let x = random(6, 4, 5);
        let (wq, wk, wv) = (random(4, 4, 6), random(4, 4, 7), random(4, 4, 8));
        let w = AttentionWeights {
            w_q: &wq,
            w_k: &wk,
            w_v: &wv,
        };
        let (_, cache) = causal_attention_forward(&x, &w).unwrap();
        for i in 0..6 {
            let row = cache.weights.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row[i + 1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let x = random(3, 8, 9);
        let (y, _) =
            layer_norm_forward(&x, &Tensor2D::row_vector(&[1.0; 8]), &Tensor2D::zeros(1, 8))
                .unwrap();
        for r in 0..3 {
            let m = y.row(r).iter().sum::<f64>() / 8.0;
            let v = y.row(r).iter().map(|a| (a - m) * (a - m)).sum::<f64>() / 8.0;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let w4 = Tensor2D::zeros(4, 4);
        let w = AttentionWeights {
            w_q: &w4,
            w_k: &w4,
            w_v: &w4,
        };
        assert!(causal_attention_forward(&Tensor2D::zeros(0, 4), &w).is_err());
        assert!(causal_attention_forward(&Tensor2D::zeros(2, 3), &w).is_err());
    }
}
