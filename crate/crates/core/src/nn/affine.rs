use super::tensor::Tensor2D;
use crate::error::{Error, Result};

/// `y = x W + b` for a batch `x` (n × in), `W` (in × out), `b` (1 × out).
pub fn affine_forward(x: &Tensor2D, w: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::dim(format!(
            "bias {:?} for weight {:?}",
            b.shape(),
            w.shape()
        )));
    }
    let mut y = x.matmul(w)?;
    y.add_row_broadcast(b)?;
    Ok(y)
}

#[derive(Clone, Debug)]
pub struct AffineGrads {
    pub dx: Tensor2D,
    pub dw: Tensor2D,
    pub db: Tensor2D,
}

pub fn affine_backward(x: &Tensor2D, w: &Tensor2D, dy: &Tensor2D) -> Result<AffineGrads> {
    if dy.rows() != x.rows() || dy.cols() != w.cols() {
        return Err(Error::dim(format!(
            "upstream {:?} for x {:?}, W {:?}",
            dy.shape(),
            x.shape(),
            w.shape()
        )));
    }
    Ok(AffineGrads {
        dx: dy.matmul_t(w)?,
        dw: x.t_matmul(dy)?,
        db: dy.sum_rows(),
    })
}

pub fn relu(x: &Tensor2D) -> Tensor2D {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given its *output*.
pub fn relu_backward(y: &Tensor2D, dy: &Tensor2D) -> Tensor2D {
    let mut dx = dy.clone();
    for (d, &o) in dx.data_mut().iter_mut().zip(y.data()) {
        if o <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}
