//! Self-describing frames carrying quantized activations between stages.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "QPIP"
//! 4       1     version (1)
//! 5       2     stage_id, u16
//! 7       8     microbatch_id, u64
//! 15      1     bitwidth, u8 (2|4|6|8|16|32)
//! 16      1     ndim, u8
//! 17      4*n   shape extents, u32 each
//! 17+4n   4     offset, f32
//! 21+4n   4     step, f32
//! 25+4n   4     clip_alpha, f32 (0 when unclipped)
//! 29+4n   4     clip_center, f32
//! 33+4n   4     payload_len, u32
//! 37+4n   4     crc32 (IEEE) over the payload
//! 41+4n   ...   payload
//! ```
//!
//! The payload is the packed code stream for bitwidths below 32 and raw
//! little-endian f32 values at 32. `payload_len` is always
//! `ceil(n_elems * bitwidth / 8)` (equivalently `4 * n_elems` at 32).

use crate::error::{Error, Result};
use crate::quant::{pack_codes, unpack_codes, Bitwidth, ClipSpec, QuantizedTensor};

pub const MAGIC: [u8; 4] = *b"QPIP";
pub const VERSION: u8 = 1;
/// Header bytes excluding the shape list.
pub const FIXED_HEADER_LEN: usize = 41;

/// Decoded frame header.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameHeader {
    pub stage_id: u16,
    pub microbatch_id: u64,
    pub bitwidth: Bitwidth,
    pub shape: Vec<usize>,
    pub offset: f32,
    pub step: f32,
    /// Zero when the tensor was not clipped.
    pub clip_alpha: f32,
    pub clip_center: f32,
    pub payload_len: u32,
    pub crc32: u32,
}

impl FrameHeader {
    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER_LEN + 4 * self.shape.len()
    }
}

/// Total encoded size of a frame for `n_elems` elements of width `q` with
/// `ndim` shape extents.
pub fn frame_len(n_elems: usize, ndim: usize, q: Bitwidth) -> usize {
    FIXED_HEADER_LEN + 4 * ndim + q.payload_len(n_elems)
}

/// Serialize a quantized tensor into a frame.
pub fn encode_frame(stage_id: u16, microbatch_id: u64, t: &QuantizedTensor) -> Result<Vec<u8>> {
    t.validate()?;
    if t.shape.len() > u8::MAX as usize {
        return Err(Error::InvalidConfig(format!(
            "{} dims exceed frame limit",
            t.shape.len()
        )));
    }
    if t.shape.iter().any(|&d| d > u32::MAX as usize) {
        return Err(Error::InvalidConfig("shape extent exceeds u32".into()));
    }

    let payload = if t.bitwidth.is_passthrough() {
        let mut p = Vec::with_capacity(t.codes.len() * 4);
        for &c in &t.codes {
            p.extend_from_slice(&c.to_le_bytes());
        }
        p
    } else {
        pack_codes(&t.codes, t.bitwidth)?
    };
    let crc = crc32fast::hash(&payload);

    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + 4 * t.shape.len() + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&stage_id.to_le_bytes());
    out.extend_from_slice(&microbatch_id.to_le_bytes());
    out.push(t.bitwidth.bits());
    out.push(t.shape.len() as u8);
    for &d in &t.shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&t.offset.to_le_bytes());
    out.extend_from_slice(&t.step.to_le_bytes());
    let (alpha, center) = match &t.clip {
        Some(c) => (c.alpha, c.center),
        None => (0.0, 0.0),
    };
    out.extend_from_slice(&alpha.to_le_bytes());
    out.extend_from_slice(&center.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc.to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::ShortRead {
                need: self.pos + n,
                have: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parse and validate a frame, returning the header and the quantized tensor.
pub fn decode_frame(bytes: &[u8]) -> Result<(FrameHeader, QuantizedTensor)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::NotAFrame);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let stage_id = r.u16()?;
    let microbatch_id = r.u64()?;
    let bitwidth = Bitwidth::from_bits(r.u8()?)?;
    let ndim = r.u8()? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(r.u32()? as usize);
    }
    let offset = r.f32()?;
    let step = r.f32()?;
    let clip_alpha = r.f32()?;
    let clip_center = r.f32()?;
    let payload_len = r.u32()?;
    let crc = r.u32()?;

    let n_elems: usize = shape.iter().product();
    if shape.contains(&0) || bitwidth.payload_len(n_elems) != payload_len as usize {
        return Err(Error::ShapeMismatch {
            shape,
            len: payload_len as usize,
        });
    }
    let payload = r.take(payload_len as usize)?;
    if crc32fast::hash(payload) != crc {
        return Err(Error::CorruptPayload);
    }

    let codes = if bitwidth.is_passthrough() {
        payload
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    } else {
        unpack_codes(payload, bitwidth, n_elems)?
    };

    let clip = if clip_alpha > 0.0 {
        Some(ClipSpec::new(clip_alpha, clip_center)?)
    } else {
        None
    };

    let header = FrameHeader {
        stage_id,
        microbatch_id,
        bitwidth,
        shape: shape.clone(),
        offset,
        step,
        clip_alpha,
        clip_center,
        payload_len,
        crc32: crc,
    };
    let tensor = QuantizedTensor {
        codes,
        bitwidth,
        offset,
        step,
        shape,
        clip,
    };
    Ok((header, tensor))
}

/// Length-prefixed frame transport over any byte stream (one u32-LE length
/// prefix per frame). Usable directly over [`std::net::TcpStream`].
pub mod transport {
    use super::*;
    use std::io::{Read, Write};

    pub fn send_frame<W: Write>(w: &mut W, frame: &[u8]) -> Result<()> {
        w.write_all(&(frame.len() as u32).to_le_bytes())?;
        w.write_all(frame)?;
        Ok(())
    }

    pub fn recv_frame<R: Read>(r: &mut R) -> Result<Vec<u8>> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut buf)?;
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::{quantize, Tensor};

    fn sample_tensor() -> Tensor {
        let data: Vec<f32> = (0..24).map(|i| (i as f32 - 12.0) * 0.25).collect();
        Tensor::new(data, vec![2, 3, 4]).unwrap()
    }

    #[test]
    fn round_trip_all_widths() {
        let t = sample_tensor();
        for q in Bitwidth::ALL {
            let qt = quantize(&t, q, None).unwrap();
            let bytes = encode_frame(3, 77, &qt).unwrap();
            let (h, back) = decode_frame(&bytes).unwrap();
            assert_eq!(h.stage_id, 3);
            assert_eq!(h.microbatch_id, 77);
            assert_eq!(h.bitwidth, q);
            assert_eq!(h.shape, vec![2, 3, 4]);
            assert_eq!(back, qt, "width {q}");
        }
    }

    #[test]
    fn payload_sizes() {
        let data: Vec<f32> = (0..1000).map(|i| i as f32).collect();
        let t = Tensor::from_vec(data).unwrap();

        let q2 = quantize(&t, Bitwidth::B2, None).unwrap();
        let f2 = encode_frame(0, 0, &q2).unwrap();
        let (h2, _) = decode_frame(&f2).unwrap();
        assert_eq!(h2.payload_len, 250);

        let q8 = quantize(&t, Bitwidth::B8, None).unwrap();
        let q32 = quantize(&t, Bitwidth::B32, None).unwrap();
        let (h8, _) = decode_frame(&encode_frame(0, 0, &q8).unwrap()).unwrap();
        let (h32, _) = decode_frame(&encode_frame(0, 0, &q32).unwrap()).unwrap();
        assert_eq!(h8.payload_len, 1000);
        assert_eq!(h32.payload_len, 4000);
        assert_eq!(h32.payload_len, 4 * h8.payload_len);
    }

    #[test]
    fn payload_ratio_exact() {
        let n = 960usize; // multiple of 4 so every width packs evenly
        let t = Tensor::from_vec((0..n).map(|i| i as f32).collect()).unwrap();
        let full = Bitwidth::B32.payload_len(n);
        for q in Bitwidth::ALL {
            let qt = quantize(&t, q, None).unwrap();
            assert_eq!(qt.payload_len() * 32, full * q.bits() as usize, "width {q}");
        }
    }

    #[test]
    fn bit_flip_detected() {
        let qt = quantize(&sample_tensor(), Bitwidth::B8, None).unwrap();
        let mut bytes = encode_frame(0, 0, &qt).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x10;
        assert!(matches!(decode_frame(&bytes), Err(Error::CorruptPayload)));
    }

    #[test]
    fn truncation_detected() {
        let qt = quantize(&sample_tensor(), Bitwidth::B4, None).unwrap();
        let bytes = encode_frame(0, 0, &qt).unwrap();
        assert!(matches!(
            decode_frame(&bytes[..bytes.len() - 1]),
            Err(Error::ShortRead { .. })
        ));
    }

    #[test]
    fn bad_magic_detected() {
        let qt = quantize(&sample_tensor(), Bitwidth::B4, None).unwrap();
        let mut bytes = encode_frame(0, 0, &qt).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_frame(&bytes), Err(Error::NotAFrame)));
    }

    #[test]
    fn bad_version_detected() {
        let qt = quantize(&sample_tensor(), Bitwidth::B4, None).unwrap();
        let mut bytes = encode_frame(0, 0, &qt).unwrap();
        bytes[4] = 9;
        assert!(matches!(decode_frame(&bytes), Err(Error::BadVersion(9))));
    }

    #[test]
    fn inconsistent_tensor_rejected() {
        let mut qt = quantize(&sample_tensor(), Bitwidth::B4, None).unwrap();
        qt.shape = vec![5];
        assert!(encode_frame(0, 0, &qt).is_err());
    }

    #[test]
    fn total_length_matches_formula() {
        let t = sample_tensor();
        for q in Bitwidth::ALL {
            let qt = quantize(&t, q, None).unwrap();
            let bytes = encode_frame(1, 2, &qt).unwrap();
            assert_eq!(bytes.len(), frame_len(t.len(), t.shape().len(), q));
        }
    }

    #[test]
    fn transport_loopback() {
        use std::io::Cursor;
        let qt = quantize(&sample_tensor(), Bitwidth::B6, None).unwrap();
        let frame = encode_frame(1, 42, &qt).unwrap();

        let mut buf = Vec::new();
        transport::send_frame(&mut buf, &frame).unwrap();
        let mut cur = Cursor::new(buf);
        let got = transport::recv_frame(&mut cur).unwrap();
        assert_eq!(got, frame);
    }

    #[test]
    fn transport_tcp() {
        use std::net::{TcpListener, TcpStream};
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let qt = quantize(&sample_tensor(), Bitwidth::B2, None).unwrap();
        let frame = encode_frame(0, 9, &qt).unwrap();

        let sent = frame.clone();
        let handle = std::thread::spawn(move || {
            let mut stream = TcpStream::connect(addr).unwrap();
            transport::send_frame(&mut stream, &sent).unwrap();
        });
        let (mut conn, _) = listener.accept().unwrap();
        let got = transport::recv_frame(&mut conn).unwrap();
        handle.join().unwrap();

        assert_eq!(got, frame);
        let (_, back) = decode_frame(&got).unwrap();
        assert_eq!(back, qt);
    }
}
