use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2D;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Gradient buffers laid out parallel to a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Grads(Vec<Tensor2D>);

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads(
            store
                .values
                .iter()
                .map(|t| Tensor2D::zeros(t.rows(), t.cols()))
                .collect(),
        )
    }

    pub fn get(&self, id: ParamId) -> &Tensor2D {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor2D {
        &mut self.0[id.0]
    }

    pub fn add(&mut self, id: ParamId, g: &Tensor2D) -> Result<()> {
        self.0[id.0].add_assign(g)
    }

    pub fn merge(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            // shapes match by construction
            a.add_assign(b).expect("grad shapes");
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.0 {
            g.scale(s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(Tensor2D::sum_sq).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor2D> {
        self.0.iter()
    }
}

/// Named parameters with gradient accumulators and Adam state.
#[derive(Clone, Debug)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor2D>,
    grads: Grads,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            grads: Grads(Vec::new()),
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2D) -> ParamId {
        let n = value.data().len();
        self.grads.0.push(Tensor2D::zeros(value.rows(), value.cols()));
        self.names.push(name.into());
        self.values.push(value);
        self.m.push(vec![0.0; n]);
        self.v.push(vec![0.0; n]);
        ParamId(self.values.len() - 1)
    }

    /// Uniform(−bound, bound) initialized parameter.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut R,
    ) -> ParamId {
        let data = (0..rows * cols)
            .map(|_| {
                if bound > 0.0 {
                    rng.gen_range(-bound..bound)
                } else {
                    0.0
                }
            })
            .collect();
        self.add(name, Tensor2D::from_vec(rows, cols, data).expect("shape"))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor2D {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor2D {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor2D)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn grads(&self) -> &Grads {
        &self.grads
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads.0 {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn accumulate(&mut self, g: &Grads) {
        self.grads.merge(g);
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads.norm()
    }

    /// Rescales gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            self.grads.scale(max_norm / norm);
        }
        norm
    }

    /// Bias-corrected Adam update using the accumulated gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..self.values.len() {
            let g = self.grads.0[i].data();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let w = self.values[i].data_mut();
            for j in 0..w.len() {
                let gj = g[j];
                if !gj.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of {}", self.names[i])));
                }
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                w[j] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    /// Copies parameter values from `other`, which must have identical names and shapes.
    pub fn load_values(&mut self, other: &[(String, Tensor2D)]) -> Result<()> {
        if other.len() != self.values.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, found {}",
                self.values.len(),
                other.len()
            )));
        }
        for (i, (name, t)) in other.iter().enumerate() {
            if name != &self.names[i] || t.shape() != self.values[i].shape() {
                return Err(Error::Format(format!(
                    "tensor {i}: expected {} {:?}, found {name} {:?}",
                    self.names[i],
                    self.values[i].shape(),
                    t.shape()
                )));
            }
            self.values[i] = t.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_leaves_small_gradients() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor2D::zeros(1, 2));
        s.grads.get_mut(a).data_mut().copy_from_slice(&[0.3, 0.4]);
        let n = s.clip_global_norm(1.0);
        assert!((n - 0.5).abs() < 1e-15);
        assert_eq!(s.grads().get(a).data(), &[0.3, 0.4]);
    }

    #[test]
    fn clip_halves_at_twice_the_norm() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor2D::zeros(1, 2));
        let b = s.add("b", Tensor2D::zeros(1, 1));
        // global norm = sqrt(1.2² + 1.6²) = 2.0
        s.grads.get_mut(a).data_mut().copy_from_slice(&[1.2, 0.0]);
        s.grads.get_mut(b).data_mut().copy_from_slice(&[1.6]);
        s.clip_global_norm(1.0);
        assert!((s.grads().get(a).data()[0] - 0.6).abs() < 1e-15);
        assert!((s.grads().get(b).data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_matches_hand_computation() {
        // t=1: m = (1-β1) g, v = (1-β2) g², m̂ = g, v̂ = g², Δ = lr g / (|g| + ε)
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor2D::row_vector(&[0.5]));
        s.grads.get_mut(a).data_mut()[0] = 0.2;
        let cfg = AdamConfig::default();
        s.adam_step(&cfg).unwrap();
        let expected = 0.5 - 1e-3 * 0.2 / (0.2 + 1e-8);
        assert!((s.get(a).data()[0] - expected).abs() < 1e-15);
        // second step with the same gradient, computed by hand
        let m2 = 0.9 * 0.1 * 0.2 + 0.1 * 0.2;
        let v2 = 0.999 * 0.001 * 0.04 + 0.001 * 0.04;
        let mhat = m2 / (1.0 - 0.81);
        let vhat = v2 / (1.0 - 0.999f64.powi(2));
        let expected2 = expected - 1e-3 * mhat / (vhat.sqrt() + 1e-8);
        s.adam_step(&cfg).unwrap();
        assert!((s.get(a).data()[0] - expected2).abs() < 1e-15);
    }

    #[test]
    fn adam_rejects_nan_gradient() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor2D::row_vector(&[0.5]));
        s.grads.get_mut(a).data_mut()[0] = f64::NAN;
        assert!(matches!(s.adam_step(&AdamConfig::default()), Err(Error::NonFinite(_))));
    }
}
