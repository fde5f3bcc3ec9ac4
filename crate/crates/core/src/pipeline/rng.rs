//! Deterministic pseudo-random source for model weights and synthetic data.
//!
//! Everything here is defined in terms of exact integer and f32 operations
//! so that identical seeds produce bit-identical models and datasets on any
//! platform.

/// Xorshift64* generator.
#[derive(Debug, Clone)]
pub struct SplitRng {
    state: u64,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self {
            // Zero is a fixed point of xorshift; remap it.
            state: if seed == 0 {
                0x9E37_79B9_7F4A_7C15
            } else {
                seed
            },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state ^= self.state >> 12;
        self.state ^= self.state << 25;
        self.state ^= self.state >> 27;
        self.state.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform f32 in [0, 1): the top 24 bits of the output word scaled by
    /// 2^-24.
    pub fn uniform_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u32 << 24) as f32)
    }

    /// Uniform f32 in [-scale, scale): `(2u - 1) * scale` evaluated in f32.
    pub fn uniform_signed(&mut self, scale: f32) -> f32 {
        (2.0f32 * self.uniform_f32() - 1.0f32) * scale
    }

    /// Approximate standard normal: sum of 12 uniforms minus 6, accumulated
    /// left to right in f32.
    pub fn gaussian(&mut self) -> f32 {
        let mut acc = 0.0f32;
        for _ in 0..12 {
            acc += self.uniform_f32();
        }
        acc - 6.0f32
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}
