//! Dense `f32` tensors of rank 1 to 4 and the handful of operations the
//! rectifier needs.
//!
//! Layout is row-major with the last dimension varying fastest. Feature maps
//! are channels-first (`C×H×W`) and matrices are `rows×cols`.

mod conv;
pub mod linalg;

use std::fmt;

use crate::error::{Error, Result};

pub use conv::{avg_pool2d, conv2d, upsample_x2};
pub use linalg::{solve_linear, Matrix};

/// Largest `f32` strictly below one. Saturating activations are clamped to it
/// so their open-interval ranges survive rounding.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > 4 {
        return Err(Error::shape(format!("rank {} outside 1..=4", dims.len())));
    }
    if dims.contains(&0) {
        return Err(Error::shape(format!("zero extent in {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape(format!("element count of {dims:?} overflows")))
}

impl Tensor {
    pub fn new(dims: &[usize], data: Vec<f32>) -> Result<Self> {
        let len = check_dims(dims)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "dims {dims:?} need {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn full(dims: &[usize], value: f32) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Tensor {
            dims: dims.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::full(dims, 0.0)
    }

    /// Builds a tensor by evaluating `f` at each flat index.
    pub fn from_fn(dims: &[usize], f: impl FnMut(usize) -> f32) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Tensor {
            dims: dims.to_vec(),
            data: (0..len).map(f).collect(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Extents of a rank-3 tensor as `(c, h, w)`.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match *self.dims.as_slice() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(format!("expected C×H×W, got {:?}", self.dims))),
        }
    }

    /// Extents of a rank-2 tensor as `(rows, cols)`.
    pub fn matrix_dims(&self) -> Result<(usize, usize)> {
        match *self.dims.as_slice() {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(format!(
                "expected a matrix, got {:?}",
                self.dims
            ))),
        }
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Tensor> {
        Tensor::new(dims, self.data.clone())
    }

    pub fn into_reshape(self, dims: &[usize]) -> Result<Tensor> {
        Tensor::new(dims, self.data)
    }

    /// Matrix transpose.
    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.matrix_dims()?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::new(&[c, r], out)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "elementwise op on {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f32) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn strides_around(&self, axis: usize) -> (usize, usize, usize) {
        let outer = self.dims[..axis].iter().product();
        let inner = self.dims[axis + 1..].iter().product();
        (outer, self.dims[axis], inner)
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::shape(format!(
                "axis {axis} out of range for rank {}",
                self.rank()
            )));
        }
        Ok(())
    }

    fn reduce(
        &self,
        axis: usize,
        f: impl Fn(&mut dyn Iterator<Item = f32>) -> f32,
    ) -> Result<Tensor> {
        self.check_axis(axis)?;
        let (outer, n, inner) = self.strides_around(axis);
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                let mut it = (0..n).map(|k| self.data[base + k * inner]);
                out.push(f(&mut it));
            }
        }
        let mut dims: Vec<usize> = self.dims.clone();
        dims.remove(axis);
        if dims.is_empty() {
            dims.push(1);
        }
        Tensor::new(&dims, out)
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (r, k) = a.matrix_dims()?;
    let (k2, c) = b.matrix_dims()?;
    if k != k2 {
        return Err(Error::shape(format!(
            "matmul inner dims differ: {:?} · {:?}",
            a.dims, b.dims
        )));
    }
    let mut out = vec![0.0f32; r * c];
    for i in 0..r {
        let row = &mut out[i * c..(i + 1) * c];
        for p in 0..k {
            let av = a.data[i * k + p];
            let brow = &b.data[p * c..(p + 1) * c];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(&[r, c], out)
}

/// Arithmetic mean over `axis`; the axis is removed from the result.
pub fn reduce_mean(x: &Tensor, axis: usize) -> Result<Tensor> {
    let n = x.dims.get(axis).copied().unwrap_or(1) as f32;
    x.reduce(axis, |it| it.sum::<f32>() / n)
}

pub fn reduce_max(x: &Tensor, axis: usize) -> Result<Tensor> {
    x.reduce(axis, |it| it.fold(f32::NEG_INFINITY, f32::max))
}

/// Numerically stable softmax along `axis`.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    x.check_axis(axis)?;
    let (outer, n, inner) = x.strides_around(axis);
    let mut out = x.data.clone();
    let mut buf = vec![0.0f32; n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            let max = (0..n)
                .map(|k| x.data[base + k * inner])
                .fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f32;
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = (x.data[base + k * inner] - max).exp();
                sum += *slot;
            }
            for (k, &e) in buf.iter().enumerate() {
                out[base + k * inner] = (e / sum).max(f32::MIN_POSITIVE);
            }
        }
    }
    Tensor::new(&x.dims, out)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(|v| v.tanh().clamp(-BELOW_ONE, BELOW_ONE))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| (1.0 / (1.0 + (-v).exp())).clamp(f32::MIN_POSITIVE, BELOW_ONE))
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn concat(a: &Tensor, b: &Tensor, axis: usize) -> Result<Tensor> {
    a.check_axis(axis)?;
    let same_rank = a.rank() == b.rank();
    let others_match = same_rank
        && a.dims
            .iter()
            .zip(&b.dims)
            .enumerate()
            .all(|(i, (x, y))| i == axis || x == y);
    if !others_match {
        return Err(Error::shape(format!(
            "concat along {axis} of {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    let (outer, na, inner) = a.strides_around(axis);
    let nb = b.dims[axis];
    let mut out = Vec::with_capacity(a.len() + b.len());
    for o in 0..outer {
        out.extend_from_slice(&a.data[o * na * inner..(o + 1) * na * inner]);
        out.extend_from_slice(&b.data[o * nb * inner..(o + 1) * nb * inner]);
    }
    let mut dims = a.dims.clone();
    dims[axis] = na + nb;
    Tensor::new(&dims, out)
}
