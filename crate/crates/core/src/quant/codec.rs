//! Uniform quantization and dequantization of activation tensors.

use crate::error::{Error, Result};
use crate::quant::aciq::ClipSpec;
use crate::quant::tensor::{tensor_stats, Tensor};
use crate::quant::Bitwidth;

/// Integer codes plus the parameters needed to invert them.
///
/// At 32 bits the codes are the raw f32 bit patterns and `offset`/`step`
/// are unused (stored as zero).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub codes: Vec<u32>,
    pub bitwidth: Bitwidth,
    /// Value represented by code 0.
    pub offset: f32,
    /// Value increment per code.
    pub step: f32,
    pub shape: Vec<usize>,
    /// Clamp applied before coding, if any.
    pub clip: Option<ClipSpec>,
}

impl QuantizedTensor {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Packed payload size in bytes on the wire.
    pub fn payload_len(&self) -> usize {
        self.bitwidth.payload_len(self.codes.len())
    }

    /// Shape product consistency with the code vector.
    pub fn validate(&self) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if n != self.codes.len() || self.shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                shape: self.shape.clone(),
                len: self.codes.len(),
            });
        }
        if !self.bitwidth.is_passthrough() {
            let limit = self.bitwidth.levels();
            if let Some(&c) = self.codes.iter().find(|&&c| c as u64 >= limit) {
                return Err(Error::CodeOverflow {
                    code: c,
                    bits: self.bitwidth.bits(),
                });
            }
        }
        Ok(())
    }
}

/// Uniformly quantize `x` to `q` bits.
///
/// With a clip the coding range is `[center - alpha, center + alpha]` and
/// values outside clamp; without one it is `[min(x), max(x)]`. Codes use
/// round-half-to-even. A zero-width range degenerates to all-zero codes with
/// step 0.
pub fn quantize(x: &Tensor, q: Bitwidth, clip: Option<ClipSpec>) -> Result<QuantizedTensor> {
    if q.is_passthrough() {
        return Ok(QuantizedTensor {
            codes: x.data().iter().map(|v| v.to_bits()).collect(),
            bitwidth: q,
            offset: 0.0,
            step: 0.0,
            shape: x.shape().to_vec(),
            clip: None,
        });
    }

    let (lo, hi) = match &clip {
        Some(c) => (c.lo(), c.hi()),
        None => {
            let s = tensor_stats(x)?;
            (s.min as f32, s.max as f32)
        }
    };
    let max_code = (q.levels() - 1) as u32;
    let offset = lo;
    let lo_f = lo as f64;
    let width = hi as f64 - lo_f;
    let step = (width / max_code as f64) as f32;

    // Codes come from the exact f64 ratio implied by the f32 range bounds,
    // so mathematical ties (like the midpoint of a 2-bit range) round
    // half-to-even as specified rather than drifting with the f32 step.
    let codes = if width <= 0.0 || step == 0.0 {
        vec![0u32; x.len()]
    } else {
        let inv_step = max_code as f64 / width;
        x.data()
            .iter()
            .map(|&v| {
                let clamped = v.clamp(lo, hi) as f64;
                let code = ((clamped - lo_f) * inv_step).round_ties_even();
                (code as u32).min(max_code)
            })
            .collect()
    };

    Ok(QuantizedTensor {
        codes,
        bitwidth: q,
        offset,
        step,
        shape: x.shape().to_vec(),
        clip,
    })
}

/// Invert [`quantize`]: `value = offset + code * step`, bit-exact at 32 bits.
pub fn dequantize(t: &QuantizedTensor) -> Result<Tensor> {
    t.validate()?;
    let data: Vec<f32> = if t.bitwidth.is_passthrough() {
        t.codes.iter().map(|&c| f32::from_bits(c)).collect()
    } else {
        let offset = t.offset as f64;
        let step = t.step as f64;
        t.codes
            .iter()
            .map(|&c| (offset + c as f64 * step) as f32)
            .collect()
    };
    Tensor::new(data, t.shape.clone())
}
