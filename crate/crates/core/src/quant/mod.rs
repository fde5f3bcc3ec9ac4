//! Numerical quantization kernels: tensor statistics, Laplace scale
//! estimation, analytic clipping, directed-search refinement, uniform
//! quantize/dequantize, and sub-byte code packing.

mod aciq;
mod codec;
mod laplace;
mod pack;
mod tensor;
#[cfg(test)]
pub(crate) mod testutil;

pub use aciq::{aciq_alpha, aciq_alpha_oracle, ClipSpec};
pub use codec::{dequantize, quantize, QuantizedTensor};
pub use laplace::{
    build_histogram, directed_search, estimate_laplace, histogram_peak_bound, laplace_histogram,
    Histogram, LaplaceParams,
};
pub use pack::{pack_codes, packed_len, unpack_codes};
pub use tensor::{mse, mse_f32, tensor_stats, Tensor, TensorStats};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Quantization bitwidth. 32 is an unquantized bit-exact passthrough.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Bitwidth {
    B2,
    B4,
    B6,
    B8,
    B16,
    B32,
}

impl Bitwidth {
    pub const ALL: [Bitwidth; 6] = [
        Bitwidth::B2,
        Bitwidth::B4,
        Bitwidth::B6,
        Bitwidth::B8,
        Bitwidth::B16,
        Bitwidth::B32,
    ];

    pub fn bits(self) -> u8 {
        match self {
            Bitwidth::B2 => 2,
            Bitwidth::B4 => 4,
            Bitwidth::B6 => 6,
            Bitwidth::B8 => 8,
            Bitwidth::B16 => 16,
            Bitwidth::B32 => 32,
        }
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            2 => Ok(Bitwidth::B2),
            4 => Ok(Bitwidth::B4),
            6 => Ok(Bitwidth::B6),
            8 => Ok(Bitwidth::B8),
            16 => Ok(Bitwidth::B16),
            32 => Ok(Bitwidth::B32),
            other => Err(Error::UnsupportedBitwidth(other)),
        }
    }

    /// Number of representable code levels (`2^q`) for sub-passthrough widths.
    pub fn levels(self) -> u64 {
        1u64 << self.bits()
    }

    pub fn is_passthrough(self) -> bool {
        matches!(self, Bitwidth::B32)
    }

    /// Packed payload size in bytes for `n` elements at this width.
    pub fn payload_len(self, n: usize) -> usize {
        if self.is_passthrough() {
            n * 4
        } else {
            (n * self.bits() as usize).div_ceil(8)
        }
    }
}

impl TryFrom<u8> for Bitwidth {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Bitwidth::from_bits(v)
    }
}

impl From<Bitwidth> for u8 {
    fn from(b: Bitwidth) -> u8 {
        b.bits()
    }
}

impl std::fmt::Display for Bitwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.bits())
    }
}
