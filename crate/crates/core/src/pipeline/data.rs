//! Synthetic Gaussian-cluster dataset, generated deterministically from a
//! seed.

use crate::error::{Error, Result};
use crate::pipeline::rng::SplitRng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub n_microbatches: usize,
    pub microbatch_size: usize,
    /// Cluster centers are uniform in `(-center_scale, center_scale)^d`.
    #[serde(default = "default_center_scale")]
    pub center_scale: f32,
    /// Per-dimension Gaussian noise around the center.
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f32,
    /// Per-sample amplitude spread: each sample is scaled by
    /// `1 + amplitude_jitter * |g|` with `g` standard normal. Zero keeps all
    /// samples at unit gain; larger values give the activations heavy tails.
    #[serde(default)]
    pub amplitude_jitter: f32,
    /// Fraction of samples additionally scaled by `outlier_gain`, making the
    /// activation statistics a two-scale mixture.
    #[serde(default)]
    pub outlier_fraction: f32,
    #[serde(default = "default_outlier_gain")]
    pub outlier_gain: f32,
}

fn default_outlier_gain() -> f32 {
    1.0
}

fn default_center_scale() -> f32 {
    2.0
}

fn default_noise_sigma() -> f32 {
    0.3
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_microbatches == 0 || self.microbatch_size == 0 {
            return Err(Error::InvalidConfig(
                "dataset needs at least one microbatch of at least one image".into(),
            ));
        }
        let nonneg = |x: f32| x.is_finite() && x >= 0.0;
        if !(self.center_scale.is_finite() && self.center_scale > 0.0)
            || !nonneg(self.noise_sigma)
            || !nonneg(self.amplitude_jitter)
        {
            return Err(Error::InvalidConfig("bad dataset spread parameters".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction)
            || !(self.outlier_gain.is_finite() && self.outlier_gain >= 0.0)
        {
            return Err(Error::InvalidConfig(
                "bad outlier mixture parameters".into(),
            ));
        }
        Ok(())
    }
}

/// One unit of pipelined work: `microbatch_size` input vectors plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Microbatch {
    pub id: u64,
    /// Flattened `[size x input_dim]`, row-major.
    pub inputs: Vec<f32>,
    pub labels: Vec<u32>,
}

/// Generate the full dataset for a model with `input_dim` inputs and
/// `n_classes` classes.
pub fn generate_dataset(
    cfg: &DatasetConfig,
    input_dim: usize,
    n_classes: usize,
) -> Result<Vec<Microbatch>> {
    cfg.validate()?;
    let mut rng = SplitRng::new(cfg.seed);
    let centers: Vec<Vec<f32>> = (0..n_classes)
        .map(|_| {
            (0..input_dim)
                .map(|_| rng.uniform_signed(cfg.center_scale))
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(cfg.n_microbatches);
    for mb in 0..cfg.n_microbatches {
        let mut inputs = Vec::with_capacity(cfg.microbatch_size * input_dim);
        let mut labels = Vec::with_capacity(cfg.microbatch_size);
        for _ in 0..cfg.microbatch_size {
            let label = rng.below(n_classes as u64) as u32;
            // Draw order is fixed so a seed yields aligned samples across
            // parameter settings.
            let outlier = rng.uniform_f32() < cfg.outlier_fraction;
            let mut gain = 1.0f32 + cfg.amplitude_jitter * rng.gaussian().abs();
            if outlier {
                gain *= cfg.outlier_gain;
            }
            let center = &centers[label as usize];
            for &c in center {
                inputs.push(gain * (c + cfg.noise_sigma * rng.gaussian()));
            }
            labels.push(label);
        }
        out.push(Microbatch {
            id: mb as u64,
            inputs,
            labels,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DatasetConfig {
        DatasetConfig {
            seed: 3,
            n_microbatches: 4,
            microbatch_size: 8,
            center_scale: 2.0,
            noise_sigma: 0.3,
            amplitude_jitter: 0.0,
            outlier_fraction: 0.0,
            outlier_gain: 1.0,
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_dataset(&cfg(), 6, 3).unwrap();
        let b = generate_dataset(&cfg(), 6, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shapes_and_labels() {
        let data = generate_dataset(&cfg(), 6, 3).unwrap();
        assert_eq!(data.len(), 4);
        for (i, mb) in data.iter().enumerate() {
            assert_eq!(mb.id, i as u64);
            assert_eq!(mb.inputs.len(), 8 * 6);
            assert_eq!(mb.labels.len(), 8);
            assert!(mb.labels.iter().all(|&l| l < 3));
        }
    }

    #[test]
    fn jitter_spreads_amplitudes() {
        let calm = generate_dataset(&cfg(), 6, 3).unwrap();
        let mut jittery_cfg = cfg();
        jittery_cfg.amplitude_jitter = 2.0;
        let jittery = generate_dataset(&jittery_cfg, 6, 3).unwrap();
        let amp = |mbs: &[Microbatch]| {
            mbs.iter()
                .flat_map(|m| m.inputs.iter())
                .map(|v| v.abs() as f64)
                .fold(0.0, f64::max)
        };
        assert!(amp(&jittery) > amp(&calm));
    }

    #[test]
    fn rejects_empty() {
        let mut c = cfg();
        c.n_microbatches = 0;
        assert!(generate_dataset(&c, 6, 3).is_err());
    }
}
