//! Deterministic toy sequential model: a stack of affine blocks with a
//! smooth gate nonlinearity and an affine classifier head.
//!
//! Weights come from a seeded xorshift64* stream as uniform
//! `(-1/sqrt(in), 1/sqrt(in))` values, drawn row-major (weights then bias,
//! block by block), and the forward pass accumulates strictly left to right
//! in f32, so outputs are bit-identical across runs and platforms.

use crate::error::{Error, Result};
use crate::pipeline::rng::SplitRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub blocks: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.n_classes == 0 {
            return Err(Error::InvalidConfig("model dims must be positive".into()));
        }
        if self.blocks < 2 {
            return Err(Error::InvalidConfig(
                "model needs at least 2 blocks (one hidden, one head)".into(),
            ));
        }
        Ok(())
    }
}

/// One affine block; all but the classifier head apply the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activated: bool,
}

impl Block {
    /// `y = W x + b`, then the gate when activated. Accumulation is
    /// sequential over the input index.
    pub fn forward(&self, x: &[f32], out: &mut Vec<f32>) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::DimMismatch {
                expected: self.in_dim,
                got: x.len(),
            });
        }
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out.push(if self.activated { gate(acc) } else { acc });
        }
        Ok(())
    }
}

/// Smooth gate with the usual zero-at-zero, identity-for-large-positive,
/// vanish-for-large-negative shape. Built from f32 arithmetic and sqrt only
/// (both correctly rounded under IEEE 754), so it is exactly reproducible
/// everywhere.
#[inline]
pub fn gate(x: f32) -> f32 {
    0.5f32 * x * (1.0f32 + x / (1.0f32 + x * x).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub dims: ModelDims,
    pub blocks: Vec<Block>,
}

impl ToyModel {
    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Per-block cost (multiply-accumulates), the partitioner's weight.
    pub fn block_costs(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| (b.in_dim * b.out_dim) as f64)
            .collect()
    }

    /// Full forward for one input vector.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        self.forward_range(0, self.blocks.len(), x)
    }

    /// Forward through blocks `[lo, hi)`; an empty range is the identity.
    pub fn forward_range(&self, lo: usize, hi: usize, x: &[f32]) -> Result<Vec<f32>> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for block in &self.blocks[lo..hi] {
            block.forward(&cur, &mut next)?;
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Input width of block `lo` (the model input for block 0).
    pub fn in_dim_at(&self, block: usize) -> usize {
        if block == self.blocks.len() {
            self.dims.n_classes
        } else {
            self.blocks[block].in_dim
        }
    }
}

/// Build the model from a seed: block 0 maps input to hidden, the middle
/// blocks are hidden to hidden, and the final block is the unactivated head.
/// Weights stream from the generator row-major per block; biases start at
/// zero so predictions stay input-driven at any activation scale.
pub fn build_model(seed: u64, dims: ModelDims) -> Result<ToyModel> {
    dims.validate()?;
    let mut rng = SplitRng::new(seed);
    let mut blocks = Vec::with_capacity(dims.blocks);
    for i in 0..dims.blocks {
        let head = i + 1 == dims.blocks;
        let in_dim = if i == 0 {
            dims.input_dim
        } else {
            dims.hidden_dim
        };
        let out_dim = if head {
            dims.n_classes
        } else {
            dims.hidden_dim
        };
        let scale = 1.0f32 / (in_dim as f32).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.uniform_signed(scale))
            .collect();
        blocks.push(Block {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activated: !head,
        });
    }
    Ok(ToyModel { dims, blocks })
}
