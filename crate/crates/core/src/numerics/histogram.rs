use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gaussian-smoothed, normalized histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub bin_centers: Vec<f64>,
    pub density: Vec<f64>,
    pub sigma_bins: f64,
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

impl DensityCurve {
    /// Trapezoidal `∫ density`.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.bin_centers, &self.density)
    }

    /// Trapezoidal `∫ x · density`.
    pub fn mean(&self) -> f64 {
        let xy: Vec<f64> = self
            .bin_centers
            .iter()
            .zip(&self.density)
            .map(|(x, d)| x * d)
            .collect();
        trapezoid(&self.bin_centers, &xy)
    }

    /// Bin center of the highest density; the smallest center wins ties.
    pub fn peak(&self) -> f64 {
        let mut best = 0;
        for (i, &d) in self.density.iter().enumerate() {
            if d > self.density[best] {
                best = i;
            }
        }
        self.bin_centers[best]
    }
}

/// Histogram of `values` over `[min, max]` (a zero-width range is widened by
/// ±0.5), convolved with a truncated discrete Gaussian of width `sigma_bins`
/// and renormalized to unit trapezoidal integral.
pub fn smoothed_histogram(values: &[f64], bins: usize, sigma_bins: f64) -> Result<DensityCurve> {
    if values.is_empty() {
        return Err(Error::invalid("histogram needs at least one value"));
    }
    if bins < 2 {
        return Err(Error::invalid(format!("histogram needs >= 2 bins, got {bins}")));
    }
    if !(sigma_bins > 0.0 && sigma_bins.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma_bins must be positive, got {sigma_bins}"
        )));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("histogram value {bad} is not finite")));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &v in values {
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[b] += 1.0;
    }

    let radius = ((4.0 * sigma_bins).ceil() as usize).min(bins);
    let kernel: Vec<f64> = (0..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma_bins * sigma_bins)).exp())
        .collect();
    let mut smoothed = vec![0.0; bins];
    for (i, &c) in counts.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let start = i.saturating_sub(radius);
        let end = (i + radius).min(bins - 1);
        for (j, s) in smoothed.iter_mut().enumerate().take(end + 1).skip(start) {
            *s += c * kernel[i.abs_diff(j)];
        }
    }

    let bin_centers: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    let area = trapezoid(&bin_centers, &smoothed);
    let density = smoothed.iter().map(|s| s / area).collect();
    Ok(DensityCurve {
        bin_centers,
        density,
        sigma_bins,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    /// Arithmetic mean of the raw values.
    pub mean: f64,
    /// Bin center of the highest smoothed density.
    pub peak: f64,
}

pub fn density_summary(curve: &DensityCurve, raw_values: &[f64]) -> DensitySummary {
    let mean = if raw_values.is_empty() {
        f64::NAN
    } else {
        raw_values.iter().sum::<f64>() / raw_values.len() as f64
    };
    DensitySummary {
        mean,
        peak: curve.peak(),
    }
}
