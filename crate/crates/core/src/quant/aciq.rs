//! Analytic clipping for integer quantization under a Laplace model.
//!
//! For a Laplace(mu, b) source quantized uniformly to `q` bits over
//! `[mu - alpha, mu + alpha]`, the expected error decomposes into a clipping
//! term `2 b^2 exp(-alpha/b)` and a rounding term `alpha^2 / (3 * 4^q)`.
//! The minimizing half-range scales linearly in `b`, so the per-bitwidth
//! minimizer is tabulated once at `b = 1` and scaled at call sites.

use crate::error::{Error, Result};
use crate::quant::Bitwidth;
use serde::{Deserialize, Serialize};

/// Clipping half-range and midpoint applied before quantization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    /// Half-range; values outside `[center - alpha, center + alpha]` clamp.
    pub alpha: f32,
    /// Clip midpoint (the distribution location).
    pub center: f32,
}

impl ClipSpec {
    pub fn new(alpha: f32, center: f32) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 || !center.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bad clip spec: alpha {alpha}, center {center}"
            )));
        }
        Ok(Self { alpha, center })
    }

    pub fn lo(&self) -> f32 {
        self.center - self.alpha
    }

    pub fn hi(&self) -> f32 {
        self.center + self.alpha
    }
}

// Minimizers of 2*exp(-u) + u^2/(3*4^q) at unit scale, generated by
// `aciq_alpha_oracle` (cross-checked in tests, tolerance 0.5%).
const ALPHA_TABLE: [(u8, f64); 5] = [
    (2, 2.830682989370),
    (4, 5.028640136236),
    (6, 7.413126213844),
    (8, 9.896759770018),
    (16, 20.270171638544),
];

/// Optimal clipping half-range `F(q) * b` from the embedded table.
///
/// Supported widths are 2, 4, 6, 8, 16; 32-bit passthrough has no clip.
pub fn aciq_alpha(q: Bitwidth, b: f64) -> Result<f64> {
    if !b.is_finite() || b < 0.0 {
        return Err(Error::InvalidConfig(format!("bad laplace scale {b}")));
    }
    if q.is_passthrough() {
        return Err(Error::UnclippableBitwidth(q.bits()));
    }
    let factor = ALPHA_TABLE
        .iter()
        .find(|(bits, _)| *bits == q.bits())
        .map(|(_, f)| *f)
        .ok_or(Error::UnsupportedBitwidth(q.bits()))?;
    Ok(factor * b)
}

/// Numerically minimizes the clip-plus-round error model over
/// `alpha in (0, 64 b]` by golden-section search.
///
/// This is the generator and independent cross-check for the table behind
/// [`aciq_alpha`].
pub fn aciq_alpha_oracle(q: Bitwidth, b: f64) -> Result<f64> {
    if !b.is_finite() || b < 0.0 {
        return Err(Error::InvalidConfig(format!("bad laplace scale {b}")));
    }
    if q.is_passthrough() {
        return Err(Error::UnclippableBitwidth(q.bits()));
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    let round_coeff = 1.0 / (3.0 * 4f64.powi(q.bits() as i32));
    let cost = |alpha: f64| 2.0 * b * b * (-alpha / b).exp() + alpha * alpha * round_coeff;
    Ok(golden_section_min(cost, 1e-12 * b, 64.0 * b, 1e-9 * b))
}

// Golden-section minimization of a unimodal function on [lo, hi].
fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}
