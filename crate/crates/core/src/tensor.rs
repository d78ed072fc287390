//! Dense row-major `f32` tensors and the handful of kernels the ViT forward
//! pass needs.
//!
//! Every reduction runs left to right in a fixed order. Row-parallel kernels
//! split work by output row only, so results are bit-identical for any
//! number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Work (in multiply-adds) above which row-parallel kernels fan out.
const PAR_THRESHOLD: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidTensor(format!(
                "dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidTensor(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Rank-1 tensor over `data`. Panics on an empty slice.
    pub fn vector(data: Vec<f32>) -> Self {
        assert!(!data.is_empty(), "vector must be non-empty");
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Rank-2 tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f32> = rows.iter().flatten().copied().collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the last axis.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().expect("tensor has at least one axis")
    }

    /// Number of last-axis slices.
    pub fn rows(&self) -> usize {
        self.data.len() / self.last_dim()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.last_dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `self += other`; shapes must agree exactly.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "add",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

fn fill_rows<F>(out: &mut [f32], width: usize, work: usize, f: F)
where
    F: Fn(usize, &mut [f32]) + Sync + Send,
{
    if work >= PAR_THRESHOLD {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    } else {
        out.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// `a[m×k] · b[k×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mismatch = || Error::ShapeMismatch {
        op: "matmul",
        left: a.shape.clone(),
        right: b.shape.clone(),
    };
    let (&[m, k], &[k2, n]) = (a.shape.as_slice(), b.shape.as_slice()) else {
        return Err(mismatch());
    };
    if k != k2 {
        return Err(mismatch());
    }
    let mut out = vec![0.0f32; m * n];
    fill_rows(&mut out, n, m * n * k, |i, row| {
        let a_row = &a.data[i * k..(i + 1) * k];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b.data[p * n..(p + 1) * n];
            for (o, &b_pj) in row.iter_mut().zip(b_row) {
                *o += a_ip * b_pj;
            }
        }
    });
    Tensor::new(vec![m, n], out)
}

/// `x[…×k] · wᵀ + b` with `w` of shape `[n, k]` and `b` of shape `[n]`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let k = x.last_dim();
    let (&[n, wk], &[bn]) = (w.shape.as_slice(), b.shape.as_slice()) else {
        return Err(Error::ShapeMismatch {
            op: "linear",
            left: x.shape.clone(),
            right: w.shape.clone(),
        });
    };
    if wk != k || bn != n {
        return Err(Error::ShapeMismatch {
            op: "linear",
            left: x.shape.clone(),
            right: w.shape.clone(),
        });
    }
    let rows = x.rows();
    let mut out = vec![0.0f32; rows * n];
    fill_rows(&mut out, n, rows * n * k, |i, row| {
        let x_row = &x.data[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            let w_row = &w.data[j * k..(j + 1) * k];
            let mut acc = 0.0f32;
            for (xv, wv) in x_row.iter().zip(w_row) {
                acc += xv * wv;
            }
            *o = acc + b.data[j];
        }
    });
    let mut shape = x.shape.clone();
    *shape.last_mut().expect("non-empty shape") = n;
    Tensor::new(shape, out)
}

/// Softmax over the last axis, max-subtracted.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let d = x.last_dim();
    for row in out.data.chunks_mut(d) {
        softmax_in_place(row);
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Per-slice normalization with biased variance, then `gamma * x̂ + beta`.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor> {
    let d = x.last_dim();
    if gamma.shape != [d] || beta.shape != [d] {
        return Err(Error::ShapeMismatch {
            op: "layer_norm",
            left: x.shape.clone(),
            right: gamma.shape.clone(),
        });
    }
    if eps.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidTensor(format!(
            "layer_norm eps must be > 0, got {eps}"
        )));
    }
    let mut out = x.clone();
    let inv_d = 1.0 / d as f32;
    for row in out.data.chunks_mut(d) {
        let mean = row.iter().sum::<f32>() * inv_d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() * inv_d;
        let inv_std = 1.0 / (var + eps).sqrt();
        for ((v, g), b) in row.iter_mut().zip(&gamma.data).zip(&beta.data) {
            *v = (*v - mean) * inv_std * g + b;
        }
    }
    Ok(out)
}

/// Exact GELU, `x · Φ(x)`, via the error function.
pub fn gelu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    out.data.iter_mut().for_each(|v| *v = gelu_scalar(*v));
    out
}

pub(crate) fn gelu_scalar(x: f32) -> f32 {
    let x64 = f64::from(x);
    (0.5 * x64 * (1.0 + libm::erf(x64 * std::f64::consts::FRAC_1_SQRT_2))) as f32
}
