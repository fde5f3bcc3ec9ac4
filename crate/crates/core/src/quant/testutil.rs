//! Deterministic sampling helpers shared by unit tests.

use crate::quant::tensor::Tensor;

/// Xorshift64* uniform source for test data.
pub(crate) struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(if seed == 0 { 0x9E37_79B9 } else { seed })
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Inverse-CDF Laplace sampling.
    pub fn laplace(&mut self, mu: f64, b: f64) -> f64 {
        let u = self.uniform() - 0.5;
        mu - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}

pub(crate) fn laplace_tensor(seed: u64, mu: f64, b: f64, n: usize) -> Tensor {
    let mut rng = TestRng::new(seed);
    let data: Vec<f32> = (0..n).map(|_| rng.laplace(mu, b) as f32).collect();
    Tensor::from_vec(data).unwrap()
}
