//! Sub-byte code packing.
//!
//! Codes are laid out LSB-first: code `k` occupies bit positions
//! `[k*q, (k+1)*q)` of the stream with its low bit first, and the final
//! partial byte is zero-padded. An 8-bit stream is therefore the codes
//! verbatim and a 16-bit stream is little-endian u16s.

use crate::error::{Error, Result};
use crate::quant::Bitwidth;

/// Packed byte length for `n` codes at width `q`.
pub fn packed_len(n: usize, q: Bitwidth) -> usize {
    (n * q.bits() as usize).div_ceil(8)
}

/// Pack `codes` at width `q` (2, 4, 6, 8, or 16 bits).
pub fn pack_codes(codes: &[u32], q: Bitwidth) -> Result<Vec<u8>> {
    if q.is_passthrough() {
        return Err(Error::UnsupportedBitwidth(q.bits()));
    }
    let bits = q.bits() as usize;
    let limit = q.levels();
    let mut out = vec![0u8; packed_len(codes.len(), q)];
    for (k, &code) in codes.iter().enumerate() {
        if code as u64 >= limit {
            return Err(Error::CodeOverflow {
                code,
                bits: q.bits(),
            });
        }
        let bit_pos = k * bits;
        let byte = bit_pos / 8;
        let shift = bit_pos % 8;
        // A code spans at most three bytes (16 bits misaligned).
        let word = code << shift;
        out[byte] |= word as u8;
        if shift + bits > 8 {
            out[byte + 1] |= (word >> 8) as u8;
        }
        if shift + bits > 16 {
            out[byte + 2] |= (word >> 16) as u8;
        }
    }
    Ok(out)
}

/// Unpack `n` codes of width `q` from `bytes`.
pub fn unpack_codes(bytes: &[u8], q: Bitwidth, n: usize) -> Result<Vec<u32>> {
    if q.is_passthrough() {
        return Err(Error::UnsupportedBitwidth(q.bits()));
    }
    let bits = q.bits() as usize;
    let need = packed_len(n, q);
    if bytes.len() < need {
        return Err(Error::ShortRead {
            need,
            have: bytes.len(),
        });
    }
    let mask = (q.levels() - 1) as u32;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let bit_pos = k * bits;
        let byte = bit_pos / 8;
        let shift = bit_pos % 8;
        let mut word = bytes[byte] as u32;
        if byte + 1 < bytes.len() {
            word |= (bytes[byte + 1] as u32) << 8;
        }
        if byte + 2 < bytes.len() {
            word |= (bytes[byte + 2] as u32) << 16;
        }
        out.push((word >> shift) & mask);
    }
    Ok(out)
}
