//! Laplace scale estimation, density histograms, and the directed search
//! that refines the estimated scale toward the observed distribution.

use crate::error::{Error, Result};
use crate::quant::tensor::{mse, tensor_stats, Tensor};

/// Location and scale of an estimated Laplace distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceParams {
    pub mu: f64,
    /// Scale, `>= 0`. Zero only arises from constant inputs.
    pub b: f64,
}

/// Normalized density histogram over `[lo, hi]`.
///
/// `densities[i]` is probability density, so `sum(densities) * bin_width`
/// is 1 when all mass lies inside the range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    densities: Vec<f64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, densities: Vec<f64>) -> Result<Self> {
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidHistogram(format!("hi {hi} <= lo {lo}")));
        }
        if densities.len() < 2 {
            return Err(Error::InvalidHistogram(format!(
                "need >= 2 bins, got {}",
                densities.len()
            )));
        }
        if densities.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidHistogram(
                "negative or non-finite density".into(),
            ));
        }
        Ok(Self { lo, hi, densities })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.densities.len() as f64
    }

    /// Lower edge of bin `i`.
    pub fn edge(&self, i: usize) -> f64 {
        self.lo + self.bin_width() * i as f64
    }
}

/// Estimate Laplace parameters: `mu` is the sample mean, `b` the mean
/// absolute value (uncentered).
pub fn estimate_laplace(x: &Tensor) -> Result<LaplaceParams> {
    let s = tensor_stats(x)?;
    Ok(LaplaceParams {
        mu: s.mean,
        b: s.mean_abs,
    })
}

/// Density histogram of the tensor over `[min, max]` with `bins` bins.
///
/// A constant tensor has no range; its histogram spans `[c - 0.5, c + 0.5]`
/// with all mass in the bin containing `c`.
pub fn build_histogram(x: &Tensor, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidHistogram(format!(
            "need >= 2 bins, got {bins}"
        )));
    }
    let s = tensor_stats(x)?;
    let (lo, hi) = if s.min == s.max {
        (s.min - 0.5, s.max + 0.5)
    } else {
        (s.min, s.max)
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in x.data() {
        let idx = (((v as f64 - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let norm = 1.0 / (s.n as f64 * width);
    let densities = counts.iter().map(|&c| c as f64 * norm).collect();
    Histogram::new(lo, hi, densities)
}

fn laplace_cdf(x: f64, mu: f64, b: f64) -> f64 {
    let z = (x - mu) / b;
    if z < 0.0 {
        0.5 * z.exp()
    } else {
        1.0 - 0.5 * (-z).exp()
    }
}

/// Laplace density discretized onto the template's bin edges: per-bin CDF
/// mass divided by the bin width.
pub fn laplace_histogram(p: &LaplaceParams, template: &Histogram) -> Result<Histogram> {
    if p.b <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    let bins = template.bins();
    let width = template.bin_width();
    let mut densities = Vec::with_capacity(bins);
    let mut cdf_left = laplace_cdf(template.edge(0), p.mu, p.b);
    for i in 0..bins {
        let cdf_right = laplace_cdf(template.edge(i + 1), p.mu, p.b);
        densities.push((cdf_right - cdf_left) / width);
        cdf_left = cdf_right;
    }
    Histogram::new(template.lo(), template.hi(), densities)
}

/// Search boundary implied by the histogram peak: a Laplace with scale
/// `1 / (2 max density)` matches the observed mode height.
pub fn histogram_peak_bound(d_r: &Histogram) -> Result<f64> {
    let peak = d_r.densities().iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::EmptyHistogram);
    }
    Ok(1.0 / (2.0 * peak))
}

/// Refine the estimated scale by sampling `steps` candidates between the
/// initial estimate and the peak-implied boundary, keeping the candidate
/// whose discretized density is closest (in MSE) to the observed histogram.
///
/// Falls back to the initial estimate unless a candidate is strictly better,
/// so the returned scale never fits worse than the input.
pub fn directed_search(d_r: &Histogram, p0: &LaplaceParams, steps: usize) -> Result<LaplaceParams> {
    if p0.b <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    if steps < 1 {
        return Err(Error::InvalidConfig("steps must be >= 1".into()));
    }
    let b_e = p0.b;
    let b_r = histogram_peak_bound(d_r)?;
    let lo = b_e.min(b_r);
    let hi = b_e.max(b_r);

    let fit = |b: f64| -> Result<f64> {
        let de = laplace_histogram(&LaplaceParams { mu: p0.mu, b }, d_r)?;
        mse(d_r.densities(), de.densities())
    };

    let mse_be = fit(b_e)?;
    let mut best_b = b_e;
    let mut best_mse = mse_be;
    let mut best_dist = 0.0f64;
    for k in 0..steps {
        let t = if steps == 1 {
            0.0
        } else {
            k as f64 / (steps - 1) as f64
        };
        let cand = lo + t * (hi - lo);
        let m = fit(cand)?;
        let dist = (cand - b_e).abs();
        // Strict improvement only; equal fits keep the smaller perturbation.
        if m < best_mse || (m == best_mse && dist < best_dist) {
            best_mse = m;
            best_b = cand;
            best_dist = dist;
        }
    }
    if best_mse < mse_be {
        Ok(LaplaceParams {
            mu: p0.mu,
            b: best_b,
        })
    } else {
        Ok(*p0)
    }
}
