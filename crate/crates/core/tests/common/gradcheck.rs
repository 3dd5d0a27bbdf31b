//! Central finite differences against the hand-written backward passes.
//!
//! Relative error is `|a − n| / max(|a|, |n|, FLOOR)`; the floor keeps
//! entries whose true gradient is essentially zero from dividing noise by
//! noise.

use adatta::nn::{
    affine_backward, affine_forward, causal_attention_backward, causal_attention_forward,
    gru_unroll_backward, gru_unroll_forward, hidden_states, layer_norm_backward, layer_norm_forward,
    softmax_xent, AttentionWeights, GruGrads, GruSet, Tensor2D,
};
use adatta::policy::{ppo_loss, PolicyNet, Transition};
use rand::Rng;

use super::rng;

pub const STEP: f64 = 1e-5;
pub const FLOOR: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-5;
pub const CASES: usize = 100;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

#[derive(Clone, Debug)]
pub struct Suite {
    pub layer: &'static str,
    pub cases: usize,
    pub entries: usize,
    pub worst: f64,
}

impl Suite {
    fn new(layer: &'static str) -> Self {
        Self {
            layer,
            cases: 0,
            entries: 0,
            worst: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.worst < TOLERANCE && self.worst.is_finite()
    }
}

fn random_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Tensor2D {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor2D::from_vec(rows, cols, data).unwrap()
}

fn weighted_sum(y: &Tensor2D, c: &Tensor2D) -> f64 {
    y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
}

/// Compares `analytic[i]` with the numeric derivative of `loss` with respect
/// to every entry of `inputs[i]`.
fn compare(
    suite: &mut Suite,
    inputs: &mut [Tensor2D],
    analytic: &[Tensor2D],
    loss: impl Fn(&[Tensor2D]) -> f64,
) {
    for t in 0..inputs.len() {
        for k in 0..inputs[t].data().len() {
            let orig = inputs[t].data()[k];
            inputs[t].data_mut()[k] = orig + STEP;
            let up = loss(inputs);
            inputs[t].data_mut()[k] = orig - STEP;
            let down = loss(inputs);
            inputs[t].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            suite.worst = suite.worst.max(rel_err(analytic[t].data()[k], numeric));
            suite.entries += 1;
        }
    }
    suite.cases += 1;
}

pub fn affine(seed: u64) -> Suite {
    let mut s = Suite::new("affine");
    let mut r = rng(seed);
    for _ in 0..CASES {
        let (n, i, o) = (r.gen_range(1..5), r.gen_range(1..6), r.gen_range(1..6));
        let mut p = vec![
            random_tensor(&mut r, n, i, 1.0),
            random_tensor(&mut r, i, o, 1.0),
            random_tensor(&mut r, 1, o, 1.0),
        ];
        let c = random_tensor(&mut r, n, o, 1.0);
        let g = affine_backward(&p[0], &p[1], &c).unwrap();
        let analytic = [g.dx, g.dw, g.db];
        compare(&mut s, &mut p, &analytic, |p| {
            weighted_sum(&affine_forward(&p[0], &p[1], &p[2]).unwrap(), &c)
        });
    }
    s
}

fn gru_set(p: &[Tensor2D]) -> GruSet<&Tensor2D> {
    GruSet {
        w_z: &p[0],
        w_r: &p[1],
        w_h: &p[2],
        u_z: &p[3],
        u_r: &p[4],
        u_h: &p[5],
        b_z: &p[6],
        b_r: &p[7],
        b_h: &p[8],
    }
}

/// Unrolls of length 1 to 4, so the single cell is covered by length 1.
pub fn gru(seed: u64) -> Suite {
    let mut s = Suite::new("gru");
    let mut r = rng(seed);
    for _ in 0..CASES {
        let (t, i, d) = (r.gen_range(1..5), r.gen_range(1..4), r.gen_range(1..4));
        let mut p: Vec<Tensor2D> = [(i, 0.8), (i, 0.8), (i, 0.8), (d, 0.8), (d, 0.8), (d, 0.8), (1, 0.5), (1, 0.5), (1, 0.5)]
            .iter()
            .map(|&(rows, sc)| random_tensor(&mut r, rows, d, sc))
            .collect();
        p.push(random_tensor(&mut r, t, i, 1.0));
        p.push(random_tensor(&mut r, 1, d, 0.8));
        let c = random_tensor(&mut r, t, d, 1.0);
        let forward = |p: &[Tensor2D]| {
            let w = gru_set(p);
            hidden_states(&gru_unroll_forward(&p[9], p[10].data(), &w).unwrap())
        };
        let w = gru_set(&p);
        let steps = gru_unroll_forward(&p[9], p[10].data(), &w).unwrap();
        let mut grads: GruGrads = w.zero_grads();
        let (dx, dh0) = gru_unroll_backward(&steps, &c, &w, &mut grads);
        let mut analytic: Vec<Tensor2D> = grads.as_array().into_iter().cloned().collect();
        analytic.push(dx);
        analytic.push(Tensor2D::row_vector(&dh0));
        compare(&mut s, &mut p, &analytic, |p| weighted_sum(&forward(p), &c));
    }
    s
}

pub fn attention(seed: u64) -> Suite {
    let mut s = Suite::new("attention");
    let mut r = rng(seed);
    for _ in 0..CASES {
        let (t, d, dk) = (r.gen_range(1..6), r.gen_range(1..5), r.gen_range(1..4));
        let mut p = vec![
            random_tensor(&mut r, t, d, 1.0),
            random_tensor(&mut r, d, dk, 1.0),
            random_tensor(&mut r, d, dk, 1.0),
            random_tensor(&mut r, d, d, 1.0),
        ];
        let c = random_tensor(&mut r, t, d, 1.0);
        let weights = |p: &[Tensor2D]| {
            // the closure borrows from `p`, so build the struct inline
            causal_attention_forward(
                &p[0],
                &AttentionWeights {
                    w_q: &p[1],
                    w_k: &p[2],
                    w_v: &p[3],
                },
            )
            .unwrap()
        };
        let (_, cache) = weights(&p);
        let w = AttentionWeights {
            w_q: &p[1],
            w_k: &p[2],
            w_v: &p[3],
        };
        let (dx, g) = causal_attention_backward(&cache, &c, &w).unwrap();
        let analytic = [dx, g.w_q, g.w_k, g.w_v];
        compare(&mut s, &mut p, &analytic, |p| weighted_sum(&weights(p).0, &c));
    }
    s
}

pub fn layer_norm(seed: u64) -> Suite {
    let mut s = Suite::new("layer_norm");
    let mut r = rng(seed);
    for _ in 0..CASES {
        let (n, d) = (r.gen_range(1..5), r.gen_range(2..6));
        let mut p = vec![
            random_tensor(&mut r, n, d, 2.0),
            random_tensor(&mut r, 1, d, 1.5),
            random_tensor(&mut r, 1, d, 1.0),
        ];
        let c = random_tensor(&mut r, n, d, 1.0);
        let (_, cache) = layer_norm_forward(&p[0], &p[1], &p[2]).unwrap();
        let (dx, dg, db) = layer_norm_backward(&cache, &c, &p[1]);
        compare(&mut s, &mut p, &[dx, dg, db], |p| {
            weighted_sum(&layer_norm_forward(&p[0], &p[1], &p[2]).unwrap().0, &c)
        });
    }
    s
}

pub fn softmax_cross_entropy(seed: u64) -> Suite {
    let mut s = Suite::new("softmax_xent");
    let mut r = rng(seed);
    for _ in 0..CASES {
        let n = r.gen_range(2..12);
        let target = r.gen_range(0..n);
        let mut p = vec![random_tensor(&mut r, 1, n, 3.0)];
        let g = softmax_xent(p[0].data(), target).unwrap().grad;
        compare(&mut s, &mut p, &[Tensor2D::row_vector(&g)], |p| {
            softmax_xent(p[0].data(), target).unwrap().loss
        });
    }
    s
}

/// Randomizes every policy parameter, including the zero-initialized heads.
pub fn random_policy<R: Rng>(r: &mut R, input: usize, hidden: usize, actions: usize) -> PolicyNet {
    let mut net = PolicyNet::new(input, actions, hidden, r.gen()).unwrap();
    let ids: Vec<_> = net.params().ids().collect();
    for id in ids {
        for v in net.params_mut().get_mut(id).data_mut() {
            *v = r.gen_range(-0.8..0.8);
        }
    }
    net
}

/// Three transitions: one whose ratio sits inside the clip range, one above
/// it with positive advantage and one below it with negative advantage, so
/// every branch of the surrogate is exercised.
pub fn transitions<R: Rng>(r: &mut R, net: &PolicyNet, eps: f64) -> Vec<Transition> {
    let shifts = [0.0, 2.0 * eps, -2.0 * eps];
    let signs = [if r.gen() { 1.0 } else { -1.0 }, 1.0, -1.0];
    (0..3)
        .map(|i| {
            let state: Vec<f64> = (0..net.input_dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let (probs, _) = net.evaluate(&state).unwrap();
            let action = r.gen_range(0..net.num_actions());
            // old log-prob chosen so that ρ = exp(shift) lands where intended
            let log_prob = probs[action].ln() - (1.0 + shifts[i]).ln();
            Transition {
                context: i,
                state,
                action,
                log_prob,
                value: 0.0,
                reward: 0.0,
                ret: r.gen_range(-1.0..1.0),
                advantage: signs[i] * r.gen_range(0.2..1.5),
            }
        })
        .collect()
}

pub fn policy_loss(seed: u64) -> Suite {
    let mut s = Suite::new("policy_loss");
    let mut r = rng(seed);
    let (eps, c1, c2) = (0.2, 0.25, 0.05);
    for _ in 0..CASES {
        let (i, h, a) = (r.gen_range(2..6), r.gen_range(2..7), r.gen_range(2..5));
        let mut net = random_policy(&mut r, i, h, a);
        let batch = transitions(&mut r, &net, eps);
        let refs: Vec<&Transition> = batch.iter().collect();
        let (_, grads) = ppo_loss(&net, &refs, eps, c1, c2).unwrap();
        let ids: Vec<_> = net.params().ids().collect();
        let mut p: Vec<Tensor2D> = ids.iter().map(|&id| net.params().get(id).clone()).collect();
        let analytic: Vec<Tensor2D> = ids.iter().map(|&id| grads.get(id).clone()).collect();
        let net_cell = std::cell::RefCell::new(&mut net);
        compare(&mut s, &mut p, &analytic, |p| {
            let mut n = net_cell.borrow_mut();
            for (&id, t) in ids.iter().zip(p) {
                *n.params_mut().get_mut(id) = t.clone();
            }
            ppo_loss(&**n, &refs, eps, c1, c2).unwrap().0.total
        });
    }
    s
}

pub fn all(seed: u64) -> Vec<Suite> {
    vec![
        affine(seed),
        gru(seed + 1),
        attention(seed + 2),
        layer_norm(seed + 3),
        softmax_cross_entropy(seed + 4),
        policy_loss(seed + 5),
    ]
}
