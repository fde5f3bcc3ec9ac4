//! Shared inputs for the benchmark targets.

use qpipe_core::pipeline::SplitRng;
use qpipe_core::quant::Tensor;

/// Deterministic heavy-tailed activation-like tensor.
pub fn sample_tensor(n: usize) -> Tensor {
    let mut rng = SplitRng::new(0xBEEF);
    let data: Vec<f32> = (0..n)
        .map(|_| {
            let gain = if rng.uniform_f32() < 0.1 { 8.0 } else { 1.0 };
            rng.gaussian() * gain
        })
        .collect();
    Tensor::from_vec(data).unwrap()
}
