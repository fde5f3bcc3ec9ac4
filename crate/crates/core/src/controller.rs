//! Adaptive bitwidth control: windowed monitoring, bandwidth-change
//! detection, and the bitwidth update that keeps a stage's output rate at
//! the configured target.

use crate::error::{Error, Result};
use crate::quant::Bitwidth;
use serde::{Deserialize, Serialize};

/// Metrics averaged over one completed window of microbatches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMetrics {
    pub window_len: u32,
    /// Measured send bandwidth, bytes/sec.
    pub avg_bandwidth: f64,
    /// Achieved output rate, images/sec.
    pub avg_output_rate: f64,
    /// Quantized payload bytes per microbatch.
    pub avg_quantized_size: f64,
    /// Bitwidth in effect during the window.
    pub bitwidth: Bitwidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Target output rate R, images/sec.
    pub target_rate: f64,
    /// Microbatch size S, images.
    pub microbatch_size: u32,
    /// Relative bandwidth change that arms an update.
    pub change_threshold: f64,
    /// Selectable bitwidths, ascending.
    pub allowed_bitwidths: Vec<Bitwidth>,
    /// Floor the real-valued bitwidth requirement onto the allowed ladder
    /// instead of rounding the compression factor to a power of two.
    pub ladder_mode: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            target_rate: 100.0,
            microbatch_size: 64,
            change_threshold: 0.10,
            allowed_bitwidths: Bitwidth::ALL.to_vec(),
            ladder_mode: false,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.target_rate.is_finite() || self.target_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "target rate must be positive, got {}",
                self.target_rate
            )));
        }
        if self.microbatch_size == 0 {
            return Err(Error::InvalidConfig("microbatch size must be >= 1".into()));
        }
        if !(self.change_threshold > 0.0 && self.change_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "change threshold must be in (0, 1), got {}",
                self.change_threshold
            )));
        }
        if self.allowed_bitwidths.is_empty() {
            return Err(Error::InvalidConfig("no allowed bitwidths".into()));
        }
        Ok(())
    }
}

/// True when the bandwidth moved by more than `threshold` relative to the
/// previous window (1 B/s floor guards a zero baseline).
pub fn detect_change(prev: &WindowMetrics, cur: &WindowMetrics, threshold: f64) -> bool {
    let base = prev.avg_bandwidth.max(1.0);
    (cur.avg_bandwidth - prev.avg_bandwidth).abs() / base > threshold
}

/// Bitwidth for the next window, from the current width `q`, quantized
/// microbatch size `v` (bytes), microbatch size `s`, target rate `r`
/// (images/sec), and measured bandwidth `b` (bytes/sec).
///
/// The unquantized microbatch is `v * 32 / q` bytes and the link moves
/// `(s / r) * b` bytes in one microbatch's time budget; their ratio is the
/// compression factor the next window must achieve. The result is clamped
/// to [2, 32] and floored onto the allowed set.
pub fn next_bitwidth(
    q: Bitwidth,
    v: f64,
    s: u32,
    r: f64,
    b: f64,
    cfg: &ControllerConfig,
) -> Result<Bitwidth> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(v) || !positive(b) || !positive(r) || s == 0 {
        return Err(Error::InvalidConfig(format!(
            "next_bitwidth needs positive inputs: v={v} b={b} r={r} s={s}"
        )));
    }
    let full_size = v * 32.0 / q.bits() as f64;
    let capacity = (s as f64 / r) * b;
    let ratio = full_size / capacity;

    let raw_bits = if cfg.ladder_mode {
        // Real-valued maximum width that still fits the budget.
        (32.0 / ratio).clamp(2.0, 32.0)
    } else {
        let m = ratio.log2().ceil().clamp(0.0, 4.0) as u32;
        (32u32 >> m) as f64
    };
    floor_to_allowed(raw_bits, &cfg.allowed_bitwidths)
}

fn floor_to_allowed(bits: f64, allowed: &[Bitwidth]) -> Result<Bitwidth> {
    let mut best: Option<Bitwidth> = None;
    let mut smallest: Option<Bitwidth> = None;
    for &a in allowed {
        if smallest.is_none_or(|s| a.bits() < s.bits()) {
            smallest = Some(a);
        }
        if (a.bits() as f64) <= bits && best.is_none_or(|b| a.bits() > b.bits()) {
            best = Some(a);
        }
    }
    best.or(smallest)
        .ok_or_else(|| Error::InvalidConfig("no allowed bitwidths".into()))
}

/// Why an update fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    BandwidthChange,
    RateBelowTarget,
}

impl std::fmt::Display for Trigger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Trigger::BandwidthChange => write!(f, "bandwidth-change"),
            Trigger::RateBelowTarget => write!(f, "rate-below-target"),
        }
    }
}

/// One window's controller outcome (recorded whether or not it fired).
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub window_index: u64,
    pub metrics: WindowMetrics,
    pub q_old: Bitwidth,
    pub q_new: Bitwidth,
    pub trigger: Option<Trigger>,
}

/// Per-stage adaptive controller.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    current: Bitwidth,
    prev: Option<WindowMetrics>,
    windows: u64,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, initial: Bitwidth) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            current: initial,
            prev: None,
            windows: 0,
        })
    }

    pub fn current_bitwidth(&self) -> Bitwidth {
        self.current
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// Consume one completed window: update the bitwidth when the bandwidth
    /// moved or the output rate fell below target.
    pub fn window_step(&mut self, metrics: WindowMetrics) -> Result<Decision> {
        let trigger = if self
            .prev
            .as_ref()
            .is_some_and(|p| detect_change(p, &metrics, self.cfg.change_threshold))
        {
            Some(Trigger::BandwidthChange)
        } else if metrics.avg_output_rate < self.cfg.target_rate {
            Some(Trigger::RateBelowTarget)
        } else {
            None
        };

        let q_old = self.current;
        let q_new = if trigger.is_some() {
            next_bitwidth(
                q_old,
                metrics.avg_quantized_size,
                self.cfg.microbatch_size,
                self.cfg.target_rate,
                metrics.avg_bandwidth,
                &self.cfg,
            )?
        } else {
            q_old
        };

        let decision = Decision {
            window_index: self.windows,
            metrics,
            q_old,
            q_new,
            trigger,
        };
        self.windows += 1;
        self.prev = Some(metrics);
        self.current = q_new;
        Ok(decision)
    }
}
