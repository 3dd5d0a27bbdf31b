use crate::error::{Error, Result};
use crate::nn::{
    affine_backward, affine_forward, log_softmax, relu, relu_backward, softmax, Checkpoint, Grads,
    ParamId, ParamStore, Tensor2D,
};
use crate::rng::{domain, keyed_rng};

pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Clone, Copy, Debug)]
struct NetIds {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    wa: ParamId,
    ba: ParamId,
    wc: ParamId,
    bc: ParamId,
}

/// Shared two-layer ReLU encoder with an actor head (logits over actions)
/// and a critic head (state value). Heads start at zero, so a fresh network
/// is uniform with value 0.
#[derive(Clone, Debug)]
pub struct PolicyNet {
    store: ParamStore,
    ids: NetIds,
    input_dim: usize,
    hidden: usize,
    num_actions: usize,
}

pub struct PolicyOutput {
    pub logits: Tensor2D,
    pub values: Vec<f64>,
}

impl PolicyOutput {
    pub fn probs(&self, row: usize) -> Vec<f64> {
        softmax(self.logits.row(row))
    }

    pub fn log_probs(&self, row: usize) -> Vec<f64> {
        log_softmax(self.logits.row(row))
    }
}

pub struct PolicyCache {
    x: Tensor2D,
    h1: Tensor2D,
    h2: Tensor2D,
}

impl PolicyNet {
    pub fn new(input_dim: usize, num_actions: usize, hidden: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || num_actions == 0 || hidden == 0 {
            return Err(Error::Config("policy dimensions must be positive".into()));
        }
        let mut rng = keyed_rng(seed, domain::INIT, 0x9011_c7, 0);
        let mut store = ParamStore::new();
        let b_in = 1.0 / (input_dim as f64).sqrt();
        let b_h = 1.0 / (hidden as f64).sqrt();
        let ids = NetIds {
            w1: store.add_uniform("enc.w1", input_dim, hidden, b_in, &mut rng),
            b1: store.add("enc.b1", Tensor2D::zeros(1, hidden)),
            w2: store.add_uniform("enc.w2", hidden, hidden, b_h, &mut rng),
            b2: store.add("enc.b2", Tensor2D::zeros(1, hidden)),
            wa: store.add("actor.w", Tensor2D::zeros(hidden, num_actions)),
            ba: store.add("actor.b", Tensor2D::zeros(1, num_actions)),
            wc: store.add("critic.w", Tensor2D::zeros(hidden, 1)),
            bc: store.add("critic.b", Tensor2D::zeros(1, 1)),
        };
        Ok(Self {
            store,
            ids,
            input_dim,
            hidden,
            num_actions,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn forward(&self, x: &Tensor2D) -> Result<(PolicyOutput, PolicyCache)> {
        if x.cols() != self.input_dim {
            return Err(Error::dim(format!(
                "policy input width {} != {}",
                x.cols(),
                self.input_dim
            )));
        }
        let p = |id| self.store.get(id);
        let h1 = relu(&affine_forward(x, p(self.ids.w1), p(self.ids.b1))?);
        let h2 = relu(&affine_forward(&h1, p(self.ids.w2), p(self.ids.b2))?);
        let logits = affine_forward(&h2, p(self.ids.wa), p(self.ids.ba))?;
        let values = affine_forward(&h2, p(self.ids.wc), p(self.ids.bc))?.into_vec();
        Ok((
            PolicyOutput { logits, values },
            PolicyCache { x: x.clone(), h1, h2 },
        ))
    }

    /// Action probabilities and value for one state.
    pub fn evaluate(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (out, _) = self.forward(&Tensor2D::row_vector(state))?;
        Ok((out.probs(0), out.values[0]))
    }

    /// Gradients of a loss given its derivatives w.r.t. logits (B × |A|) and values (B).
    pub fn backward(&self, cache: &PolicyCache, dlogits: &Tensor2D, dvalues: &[f64]) -> Result<Grads> {
        let p = |id| self.store.get(id);
        let mut g = Grads::zeros_like(&self.store);
        let dv = Tensor2D::from_vec(dvalues.len(), 1, dvalues.to_vec())?;
        let actor = affine_backward(&cache.h2, p(self.ids.wa), dlogits)?;
        let critic = affine_backward(&cache.h2, p(self.ids.wc), &dv)?;
        g.add(self.ids.wa, &actor.dw)?;
        g.add(self.ids.ba, &actor.db)?;
        g.add(self.ids.wc, &critic.dw)?;
        g.add(self.ids.bc, &critic.db)?;
        let dh2 = relu_backward(&cache.h2, &actor.dx.add(&critic.dx)?);
        let l2 = affine_backward(&cache.h1, p(self.ids.w2), &dh2)?;
        g.add(self.ids.w2, &l2.dw)?;
        g.add(self.ids.b2, &l2.db)?;
        let dh1 = relu_backward(&cache.h1, &l2.dx);
        let l1 = affine_backward(&cache.x, p(self.ids.w1), &dh1)?;
        g.add(self.ids.w1, &l1.dw)?;
        g.add(self.ids.b1, &l1.db)?;
        Ok(g)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_store(&self.store)
            .with_meta("format", "adatta-policy")
            .with_meta("input_dim", self.input_dim)
            .with_meta("hidden", self.hidden)
            .with_meta("num_actions", self.num_actions)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta("format")? != "adatta-policy" {
            return Err(Error::Format("not a policy checkpoint".into()));
        }
        let mut net = Self::new(
            ck.meta_parse("input_dim")?,
            ck.meta_parse("num_actions")?,
            ck.meta_parse("hidden")?,
            0,
        )?;
        net.store.load_values(&ck.tensors)?;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_net_is_uniform() {
        let net = PolicyNet::new(5, 4, 16, 1).unwrap();
        let (p, v) = net.evaluate(&[0.3, -1.0, 2.0, 0.0, 0.5]).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = PolicyNet::new(3, 2, 8, 5).unwrap();
        let back = PolicyNet::from_checkpoint(&Checkpoint::from_bytes(&net.to_checkpoint().to_bytes()).unwrap())
            .unwrap();
        assert_eq!(back.params().named().collect::<Vec<_>>(), net.params().named().collect::<Vec<_>>());
    }
}
