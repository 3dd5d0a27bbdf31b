use crate::error::{Error, Result};

/// Numerically stable softmax. Entries equal to −∞ get probability 0.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // every logit is -inf (or the vector is empty): fall back to uniform
        let n = logits.len().max(1) as f64;
        return vec![1.0 / n; logits.len()];
    }
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

#[derive(Clone, Debug)]
pub struct XentOutput {
    pub loss: f64,
    /// ∂loss/∂logits = softmax(logits) − onehot(target)
    pub grad: Vec<f64>,
}

/// Cross-entropy of `softmax(logits)` against a single target class.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<XentOutput> {
    if target >= logits.len() {
        return Err(Error::InvalidTarget {
            target,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    let loss = max + sum.ln() - logits[target];
    let mut grad: Vec<f64> = logits.iter().map(|&l| (l - max).exp() / sum).collect();
    grad[target] -= 1.0;
    Ok(XentOutput { loss, grad })
}
