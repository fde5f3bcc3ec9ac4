//! Run configuration: the single JSON document describing a simulation.

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::netsim::{SchedulePoint, DEFAULT_BURST_BYTES};
use crate::pipeline::data::DatasetConfig;
use crate::pipeline::model::ModelDims;
use crate::quant::Bitwidth;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub seed: u64,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub blocks: usize,
}

impl ModelConfig {
    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            n_classes: self.n_classes,
            blocks: self.blocks,
        }
    }
}

/// How the sender treats activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum QuantMode {
    /// Raw f32 passthrough frames.
    Off,
    /// Quantize every microbatch at one width.
    Fixed {
        bitwidth: Bitwidth,
        method: ClipMethod,
    },
    /// Windowed bitwidth adaptation.
    Adaptive { method: ClipMethod },
}

impl QuantMode {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, QuantMode::Adaptive { .. })
    }

    pub fn method(&self) -> Option<ClipMethod> {
        match self {
            QuantMode::Off => None,
            QuantMode::Fixed { method, .. } | QuantMode::Adaptive { method } => Some(*method),
        }
    }

    pub fn initial_bitwidth(&self) -> Bitwidth {
        match self {
            QuantMode::Off | QuantMode::Adaptive { .. } => Bitwidth::B32,
            QuantMode::Fixed { bitwidth, .. } => *bitwidth,
        }
    }
}

/// Clip-range selection applied before uniform quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipMethod {
    /// Full min..max range, no clipping.
    Naive,
    /// Analytic clip from the mean-|x| Laplace scale estimate.
    Aciq,
    /// Analytic clip from the directed-search-refined scale estimate.
    Pda,
}

impl std::fmt::Display for ClipMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClipMethod::Naive => write!(f, "naive"),
            ClipMethod::Aciq => write!(f, "aciq"),
            ClipMethod::Pda => write!(f, "pda"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub schedule: Vec<SchedulePoint>,
    #[serde(default = "default_burst")]
    pub burst_bytes: f64,
    #[serde(default)]
    pub delay_sec: f64,
}

fn default_burst() -> f64 {
    DEFAULT_BURST_BYTES
}

/// Windowed adaptation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    #[serde(default = "default_target_rate")]
    pub target_rate_img_s: f64,
    #[serde(default = "default_window_len")]
    pub window_len: u32,
    #[serde(default = "default_change_threshold")]
    pub change_threshold: f64,
    #[serde(default)]
    pub ladder: bool,
}

fn default_target_rate() -> f64 {
    100.0
}

fn default_window_len() -> u32 {
    50
}

fn default_change_threshold() -> f64 {
    0.10
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            target_rate_img_s: default_target_rate(),
            window_len: default_window_len(),
            change_threshold: default_change_threshold(),
            ladder: false,
        }
    }
}

/// Quantizer internals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantConfig {
    #[serde(default = "default_hist_bins")]
    pub hist_bins: usize,
    #[serde(default = "default_search_steps")]
    pub search_steps: usize,
    /// Virtual seconds charged per directed-search application.
    #[serde(default = "default_ds_overhead")]
    pub ds_overhead_sec: f64,
}

fn default_hist_bins() -> usize {
    2048
}

fn default_search_steps() -> usize {
    100
}

fn default_ds_overhead() -> f64 {
    5e-4
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self {
            hist_bins: default_hist_bins(),
            search_steps: default_search_steps(),
            ds_overhead_sec: default_ds_overhead(),
        }
    }
}

/// Override for the simulated on-wire activation volume. The real toy
/// tensors stay small; the channel and controller see frames sized as if
/// each image produced this many f32 activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub elems_per_image: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub dataset: DatasetConfig,
    pub n_stages: usize,
    /// Per-microbatch compute latency; one entry applies to all stages.
    pub compute_latency_sec: Vec<f64>,
    /// One channel per stage boundary (`n_stages - 1`).
    pub channels: Vec<ChannelConfig>,
    #[serde(default)]
    pub adapt: AdaptConfig,
    #[serde(default)]
    pub quant: QuantConfig,
    pub quant_mode: QuantMode,
    #[serde(default)]
    pub traffic: Option<TrafficConfig>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.dims().validate()?;
        self.dataset.validate()?;
        if self.n_stages == 0 {
            return Err(Error::InvalidConfig("need at least one stage".into()));
        }
        if self.n_stages > self.model.blocks {
            return Err(Error::InvalidConfig(format!(
                "{} stages exceed {} model blocks",
                self.n_stages, self.model.blocks
            )));
        }
        if self.compute_latency_sec.is_empty()
            || (self.compute_latency_sec.len() != 1
                && self.compute_latency_sec.len() != self.n_stages)
        {
            return Err(Error::InvalidConfig(format!(
                "compute_latency_sec needs 1 or {} entries, got {}",
                self.n_stages,
                self.compute_latency_sec.len()
            )));
        }
        if self
            .compute_latency_sec
            .iter()
            .any(|&l| !l.is_finite() || l < 0.0)
        {
            return Err(Error::InvalidConfig("negative compute latency".into()));
        }
        if self.channels.len() != self.n_stages - 1 {
            return Err(Error::InvalidConfig(format!(
                "need {} channels for {} stages, got {}",
                self.n_stages - 1,
                self.n_stages,
                self.channels.len()
            )));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            crate::netsim::BandwidthSchedule::from_points(&ch.schedule)
                .map_err(|e| Error::InvalidConfig(format!("channel {i}: {e}")))?;
            let nonneg = |x: f64| x.is_finite() && x >= 0.0;
            if !nonneg(ch.burst_bytes) || !nonneg(ch.delay_sec) {
                return Err(Error::InvalidConfig(format!(
                    "channel {i}: negative burst or delay"
                )));
            }
        }
        if self.quant.hist_bins < 2 {
            return Err(Error::InvalidConfig("hist_bins must be >= 2".into()));
        }
        if self.quant.search_steps < 1 {
            return Err(Error::InvalidConfig("search_steps must be >= 1".into()));
        }
        if !self.quant.ds_overhead_sec.is_finite() || self.quant.ds_overhead_sec < 0.0 {
            return Err(Error::InvalidConfig("negative ds overhead".into()));
        }
        if let Some(t) = &self.traffic {
            if t.elems_per_image == 0 {
                return Err(Error::InvalidConfig(
                    "traffic elems_per_image is zero".into(),
                ));
            }
        }
        self.controller_config().validate()?;
        Ok(())
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            target_rate: self.adapt.target_rate_img_s,
            microbatch_size: self.dataset.microbatch_size as u32,
            change_threshold: self.adapt.change_threshold,
            allowed_bitwidths: Bitwidth::ALL.to_vec(),
            ladder_mode: self.adapt.ladder,
        }
    }

    pub fn latency_for_stage(&self, stage: usize) -> f64 {
        if self.compute_latency_sec.len() == 1 {
            self.compute_latency_sec[0]
        } else {
            self.compute_latency_sec[stage]
        }
    }

    /// Replace both generator seeds (quick-exploration override).
    pub fn override_seed(&mut self, seed: u64) {
        self.model.seed = seed;
        self.dataset.seed = seed ^ 0x9E37_79B9_7F4A_7C15;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig {
            model: ModelConfig {
                seed: 1,
                input_dim: 8,
                hidden_dim: 16,
                n_classes: 4,
                blocks: 4,
            },
            dataset: DatasetConfig {
                seed: 2,
                n_microbatches: 10,
                microbatch_size: 8,
                center_scale: 2.0,
                noise_sigma: 0.3,
                amplitude_jitter: 0.0,
                outlier_fraction: 0.0,
                outlier_gain: 1.0,
            },
            n_stages: 2,
            compute_latency_sec: vec![0.01],
            channels: vec![ChannelConfig {
                schedule: vec![SchedulePoint {
                    t_sec: 0.0,
                    mbps: 1000.0,
                }],
                burst_bytes: DEFAULT_BURST_BYTES,
                delay_sec: 0.0,
            }],
            adapt: AdaptConfig::default(),
            quant: QuantConfig::default(),
            quant_mode: QuantMode::Off,
            traffic: None,
        }
    }

    #[test]
    fn valid_config_passes() {
        base().validate().unwrap();
    }

    #[test]
    fn channel_count_must_match() {
        let mut c = base();
        c.channels.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn stage_count_bounded_by_blocks() {
        let mut c = base();
        c.n_stages = 5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn quant_mode_json_shapes() {
        let off: QuantMode = serde_json::from_str(r#"{"mode": "off"}"#).unwrap();
        assert_eq!(off, QuantMode::Off);
        let fixed: QuantMode =
            serde_json::from_str(r#"{"mode": "fixed", "bitwidth": 8, "method": "pda"}"#).unwrap();
        assert_eq!(
            fixed,
            QuantMode::Fixed {
                bitwidth: Bitwidth::B8,
                method: ClipMethod::Pda
            }
        );
        let adaptive: QuantMode =
            serde_json::from_str(r#"{"mode": "adaptive", "method": "naive"}"#).unwrap();
        assert_eq!(
            adaptive,
            QuantMode::Adaptive {
                method: ClipMethod::Naive
            }
        );
        assert!(serde_json::from_str::<QuantMode>(r#"{"mode": "fixed", "bitwidth": 5}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = base();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
