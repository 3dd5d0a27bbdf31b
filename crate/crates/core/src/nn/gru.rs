//! Single-layer GRU with hand-derived backpropagation through time.
//!
//! ```text
//! z  = σ(x W_z + h U_z + b_z)
//! r  = σ(x W_r + h U_r + b_r)
//! c  = tanh(x W_h + (r ⊙ h) U_h + b_h)
//! h' = (1 − z) ⊙ h + z ⊙ c
//! ```

use rand::Rng;

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{add_outer, matvec, vecmat, Tensor2D};
use crate::error::{Error, Result};

/// The nine GRU tensors, generic over how they are held.
#[derive(Clone, Debug)]
pub struct GruSet<T> {
    pub w_z: T,
    pub w_r: T,
    pub w_h: T,
    pub u_z: T,
    pub u_r: T,
    pub u_h: T,
    pub b_z: T,
    pub b_r: T,
    pub b_h: T,
}

impl<T> GruSet<T> {
    pub fn as_array(&self) -> [&T; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z,
            &self.b_r, &self.b_h,
        ]
    }

    pub fn as_array_mut(&mut self) -> [&mut T; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    fn map<'a, U>(&'a self, f: impl Fn(&'a T) -> U) -> GruSet<U> {
        GruSet {
            w_z: f(&self.w_z),
            w_r: f(&self.w_r),
            w_h: f(&self.w_h),
            u_z: f(&self.u_z),
            u_r: f(&self.u_r),
            u_h: f(&self.u_h),
            b_z: f(&self.b_z),
            b_r: f(&self.b_r),
            b_h: f(&self.b_h),
        }
    }
}

pub type GruWeights<'a> = GruSet<&'a Tensor2D>;
pub type GruGrads = GruSet<Tensor2D>;

impl GruWeights<'_> {
    pub fn input_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u_z.rows()
    }

    pub fn zero_grads(&self) -> GruGrads {
        self.map(|t| Tensor2D::zeros(t.rows(), t.cols()))
    }
}

impl GruGrads {
    pub fn view(&self) -> GruWeights<'_> {
        self.map(|t| t)
    }
}

/// Cached activations of one recurrence step.
#[derive(Clone, Debug)]
pub struct GruStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], w: &GruWeights) -> Result<GruStep> {
    let d = w.hidden_dim();
    if x.len() != w.input_dim() || h_prev.len() != d {
        return Err(Error::dim(format!(
            "gru cell: x {} (expected {}), h {} (expected {d})",
            x.len(),
            w.input_dim(),
            h_prev.len()
        )));
    }
    let gate = |wx: &Tensor2D, uh: &Tensor2D, b: &Tensor2D, h: &[f64]| -> Vec<f64> {
        let a = vecmat(x, wx);
        let u = vecmat(h, uh);
        a.iter()
            .zip(&u)
            .zip(b.data())
            .map(|((a, u), b)| a + u + b)
            .collect()
    };
    let z: Vec<f64> = gate(w.w_z, w.u_z, w.b_z, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = gate(w.w_r, w.u_r, w.b_r, h_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let c: Vec<f64> = gate(w.w_h, w.u_h, w.b_h, &rh)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let h = (0..d)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * c[i])
        .collect();
    Ok(GruStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        c,
        h,
    })
}

/// Backpropagates `dh` through one step. Accumulates weight gradients into
/// `grads` and returns `(dx, dh_prev)`.
pub fn gru_cell_backward(
    step: &GruStep,
    dh: &[f64],
    w: &GruWeights,
    grads: &mut GruGrads,
) -> (Vec<f64>, Vec<f64>) {
    let d = dh.len();
    let mut dh_prev: Vec<f64> = (0..d).map(|i| dh[i] * (1.0 - step.z[i])).collect();
    let da_z: Vec<f64> = (0..d)
        .map(|i| dh[i] * (step.c[i] - step.h_prev[i]) * step.z[i] * (1.0 - step.z[i]))
        .collect();
    let da_c: Vec<f64> = (0..d)
        .map(|i| dh[i] * step.z[i] * (1.0 - step.c[i] * step.c[i]))
        .collect();

    let rh: Vec<f64> = step.r.iter().zip(&step.h_prev).map(|(r, h)| r * h).collect();
    add_outer(&mut grads.w_h, &step.x, &da_c);
    add_outer(&mut grads.u_h, &rh, &da_c);
    grads.b_h.data_mut().iter_mut().zip(&da_c).for_each(|(g, v)| *g += v);
    let d_rh = matvec(w.u_h, &da_c);
    let da_r: Vec<f64> = (0..d)
        .map(|i| d_rh[i] * step.h_prev[i] * step.r[i] * (1.0 - step.r[i]))
        .collect();
    for i in 0..d {
        dh_prev[i] += d_rh[i] * step.r[i];
    }

    add_outer(&mut grads.w_r, &step.x, &da_r);
    add_outer(&mut grads.u_r, &step.h_prev, &da_r);
    grads.b_r.data_mut().iter_mut().zip(&da_r).for_each(|(g, v)| *g += v);
    add_outer(&mut grads.w_z, &step.x, &da_z);
    add_outer(&mut grads.u_z, &step.h_prev, &da_z);
    grads.b_z.data_mut().iter_mut().zip(&da_z).for_each(|(g, v)| *g += v);

    for extra in [matvec(w.u_r, &da_r), matvec(w.u_z, &da_z)] {
        dh_prev.iter_mut().zip(&extra).for_each(|(a, e)| *a += e);
    }

    let mut dx = matvec(w.w_z, &da_z);
    for extra in [matvec(w.w_r, &da_r), matvec(w.w_h, &da_c)] {
        dx.iter_mut().zip(&extra).for_each(|(a, e)| *a += e);
    }
    (dx, dh_prev)
}

/// Runs the recurrence over the rows of `xs` starting from `h0`.
pub fn gru_unroll_forward(xs: &Tensor2D, h0: &[f64], w: &GruWeights) -> Result<Vec<GruStep>> {
    let mut steps = Vec::with_capacity(xs.rows());
    let mut h = h0.to_vec();
    for t in 0..xs.rows() {
        let step = gru_cell_forward(xs.row(t), &h, w)?;
        h.clone_from(&step.h);
        steps.push(step);
    }
    Ok(steps)
}

pub fn hidden_states(steps: &[GruStep]) -> Tensor2D {
    let d = steps.first().map_or(0, |s| s.h.len());
    let mut out = Tensor2D::zeros(steps.len(), d);
    for (t, s) in steps.iter().enumerate() {
        out.row_mut(t).copy_from_slice(&s.h);
    }
    out
}

/// BPTT given upstream gradients for every hidden state. Returns the input
/// gradient matrix and the gradient for `h0`.
pub fn gru_unroll_backward(
    steps: &[GruStep],
    d_hidden: &Tensor2D,
    w: &GruWeights,
    grads: &mut GruGrads,
) -> (Tensor2D, Vec<f64>) {
    let d = w.hidden_dim();
    let mut dx = Tensor2D::zeros(steps.len(), w.input_dim());
    let mut carry = vec![0.0; d];
    for t in (0..steps.len()).rev() {
        let dh: Vec<f64> = d_hidden.row(t).iter().zip(&carry).map(|(a, b)| a + b).collect();
        let (dxt, dhp) = gru_cell_backward(&steps[t], &dh, w, grads);
        dx.row_mut(t).copy_from_slice(&dxt);
        carry = dhp;
    }
    (dx, carry)
}

/// GRU parameters registered in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct GruLayer {
    ids: GruSet<ParamId>,
}

impl GruLayer {
    /// Weights uniform(−1/√d, 1/√d), biases zero.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut w = |name: &str, rows: usize, b: f64| {
            store.add_uniform(format!("{prefix}.{name}"), rows, hidden, b, rng)
        };
        let ids = GruSet {
            w_z: w("w_z", input_dim, bound),
            w_r: w("w_r", input_dim, bound),
            w_h: w("w_h", input_dim, bound),
            u_z: w("u_z", hidden, bound),
            u_r: w("u_r", hidden, bound),
            u_h: w("u_h", hidden, bound),
            b_z: w("b_z", 1, 0.0),
            b_r: w("b_r", 1, 0.0),
            b_h: w("b_h", 1, 0.0),
        };
        Self { ids }
    }

    pub fn weights<'a>(&self, store: &'a ParamStore) -> GruWeights<'a> {
        self.ids.map(|&id| store.get(id))
    }

    pub fn add_grads(&self, g: &GruGrads, out: &mut Grads) -> Result<()> {
        for (id, t) in self.ids.as_array().into_iter().zip(g.as_array()) {
            out.add(*id, t)?;
        }
        Ok(())
    }
}
