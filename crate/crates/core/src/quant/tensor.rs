//! Dense f32 tensors and the scalar statistics the quantizers consume.

use crate::error::{Error, Result};

/// Dense 32-bit float tensor with an explicit shape.
///
/// Construction validates that the shape covers the data exactly, that every
/// extent is positive, and that every element is finite. Downstream code can
/// therefore assume non-empty, finite data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    data: Vec<f32>,
    shape: Vec<usize>,
}

impl Tensor {
    pub fn new(data: Vec<f32>, shape: Vec<usize>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                shape,
                len: data.len(),
            });
        }
        let n: usize = shape.iter().product();
        if n != data.len() || data.is_empty() {
            return Err(Error::ShapeMismatch {
                shape,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { data, shape })
    }

    /// 1-D tensor over `data`.
    pub fn from_vec(data: Vec<f32>) -> Result<Self> {
        let n = data.len();
        Self::new(data, vec![n])
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Single-pass summary statistics of a tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub mean_abs: f64,
    pub n: usize,
}

/// Exact single-pass min/max/mean/mean-|x| over a tensor.
pub fn tensor_stats(x: &Tensor) -> Result<TensorStats> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0f64;
    let mut sum_abs = 0.0f64;
    for &v in x.data() {
        let v = v as f64;
        min = min.min(v);
        max = max.max(v);
        sum += v;
        sum_abs += v.abs();
    }
    let n = x.len();
    Ok(TensorStats {
        min,
        max,
        mean: sum / n as f64,
        mean_abs: sum_abs / n as f64,
        n,
    })
}

/// Mean squared error between two equal-length slices.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// `mse` over f32 tensors, accumulated in f64.
pub fn mse_f32(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}
