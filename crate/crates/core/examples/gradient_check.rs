//! Compare the hand-written backward passes of the affine layer and the GRU
//! unroll against central finite differences.
//!
//!     cargo run --release --example gradient_check

use adatta::nn::{affine_backward, affine_forward, gru_unroll_backward, gru_unroll_forward, hidden_states, GruSet, Tensor2D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn random(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2D {
    Tensor2D::from_vec(rows, cols, (0..rows * cols).map(|_| r.gen_range(-0.8..0.8)).collect()).unwrap()
}

/// Worst relative error between `analytic` and the numeric gradient of `loss`
/// with respect to every entry of `x`.
fn worst(x: &mut Tensor2D, analytic: &Tensor2D, loss: impl Fn(&Tensor2D) -> f64) -> f64 {
    let mut w: f64 = 0.0;
    for k in 0..x.data().len() {
        let orig = x.data()[k];
        x.data_mut()[k] = orig + STEP;
        let up = loss(x);
        x.data_mut()[k] = orig - STEP;
        let down = loss(x);
        x.data_mut()[k] = orig;
        let n = (up - down) / (2.0 * STEP);
        let a = analytic.data()[k];
        w = w.max((a - n).abs() / a.abs().max(n.abs()).max(1e-4));
    }
    w
}

fn dot(a: &Tensor2D, b: &Tensor2D) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn main() {
    let mut r = ChaCha8Rng::seed_from_u64(1);

    // affine: L = Σ c ⊙ (xW + b)
    let (x, w, b) = (random(&mut r, 3, 4), random(&mut r, 4, 2), random(&mut r, 1, 2));
    let c = random(&mut r, 3, 2);
    let g = affine_backward(&x, &w, &c).unwrap();
    let ex = worst(&mut x.clone(), &g.dx, |x| dot(&affine_forward(x, &w, &b).unwrap(), &c));
    let ew = worst(&mut w.clone(), &g.dw, |w| dot(&affine_forward(&x, w, &b).unwrap(), &c));
    println!("affine     dx {ex:.1e}  dW {ew:.1e}");

    // GRU over four steps: L = Σ c ⊙ H
    let (t, i, d) = (4, 3, 3);
    let p: Vec<Tensor2D> = [i, i, i, d, d, d, 1, 1, 1].iter().map(|&rows| random(&mut r, rows, d)).collect();
    let set = |p: &[Tensor2D]| GruSet {
        w_z: p[0].clone(),
        w_r: p[1].clone(),
        w_h: p[2].clone(),
        u_z: p[3].clone(),
        u_r: p[4].clone(),
        u_h: p[5].clone(),
        b_z: p[6].clone(),
        b_r: p[7].clone(),
        b_h: p[8].clone(),
    };
    let xs = random(&mut r, t, i);
    let c = random(&mut r, t, d);
    let h0 = vec![0.0; d];
    let weights = set(&p);
    let refs = weights.view();
    let steps = gru_unroll_forward(&xs, &h0, &refs).unwrap();
    let mut grads = refs.zero_grads();
    let (dx, _) = gru_unroll_backward(&steps, &c, &refs, &mut grads);
    let ex = worst(&mut xs.clone(), &dx, |xs| dot(&hidden_states(&gru_unroll_forward(xs, &h0, &refs).unwrap()), &c));
    println!("gru        dx {ex:.1e}");
    for (k, name) in ["W_z", "W_r", "W_h", "U_z", "U_r", "U_h"].iter().enumerate() {
        let analytic = grads.as_array()[k].clone();
        let e = worst(&mut p[k].clone(), &analytic, |pk| {
            let mut q = p.clone();
            q[k] = pk.clone();
            let w = set(&q);
            dot(&hidden_states(&gru_unroll_forward(&xs, &h0, &w.view()).unwrap()), &c)
        });
        println!("gru        d{name} {e:.1e}");
    }
}
