use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dim("ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "matmul {:?} x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::dim(format!(
                "t_matmul {:?}ᵀ x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let arow = self.row(r);
            let brow = other.row(r);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::dim(format!(
                "matmul_t {:?} x {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Adds the `1 x cols` tensor `bias` to every row.
    pub fn add_row_broadcast(&mut self, bias: &Self) -> Result<()> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::dim(format!(
                "row broadcast {:?} onto {:?}",
                bias.shape(),
                self.shape()
            )));
        }
        for r in 0..self.rows {
            for (v, b) in self.row_mut(r).iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Column sums as a `1 x cols` tensor.
    pub fn sum_rows(&self) -> Self {
        let mut out = Self::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, v) in out.data.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Mean of all rows, as a plain vector.
    pub fn mean_rows(&self) -> Vec<f64> {
        let mut out = self.sum_rows().data;
        if self.rows > 0 {
            let n = self.rows as f64;
            out.iter_mut().for_each(|v| *v /= n);
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len(), self.cols);
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).copy_from_slice(self.row(i));
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `xᵀ W` for a row vector `x`.
pub fn vecmat(x: &[f64], w: &Tensor2D) -> Vec<f64> {
    debug_assert_eq!(x.len(), w.rows());
    let mut out = vec![0.0; w.cols()];
    for (k, &a) in x.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, b) in out.iter_mut().zip(w.row(k)) {
            *o += a * b;
        }
    }
    out
}

/// `W y`, the input-side gradient of `vecmat`.
pub fn matvec(w: &Tensor2D, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), w.cols());
    (0..w.rows()).map(|r| dot(w.row(r), y)).collect()
}

/// `g += x yᵀ`
pub fn add_outer(g: &mut Tensor2D, x: &[f64], y: &[f64]) {
    debug_assert_eq!(g.shape(), (x.len(), y.len()));
    for (r, &a) in x.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, b) in g.row_mut(r).iter_mut().zip(y) {
            *o += a * b;
        }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
    }
}
