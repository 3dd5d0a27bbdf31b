use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, keyed_rng};

pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(p, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations. Stops when no centroid
/// moves more than [`SHIFT_TOLERANCE`] or after [`MAX_ITERATIONS`]. A
/// cluster that loses all its points is re-seeded at the point farthest from
/// its current centroid.
pub fn kmeans_cluster(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::TooFewPoints { k, n });
    }
    let dim = points[0].len();
    let mut rng = keyed_rng(seed, domain::KMEANS, k as u64, n as u64);

    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            d2.iter()
                .position(|&d| {
                    u -= d;
                    u < 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[next].clone());
    }

    let mut assignment = vec![0; n];
    let mut objective = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut obj = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assignment[i] = c;
            obj += d;
        }
        objective.push(obj);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            sums[c].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let new = if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[c])
                            .total_cmp(&sq_dist(&points[b], &centroids[c]))
                            .then(b.cmp(&a))
                    })
                    .expect("non-empty");
                points[far].clone()
            } else {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            };
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    // final assignment against the converged centroids
    for (i, p) in points.iter().enumerate() {
        assignment[i] = nearest(p, &centroids).0;
    }
    Ok(KMeansResult {
        assignment,
        centroids,
        objective,
        iterations,
    })
}
