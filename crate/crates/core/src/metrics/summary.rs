use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Tukey fence multiplier.
pub const FENCE_IQR: f64 = 1.5;

/// Location and spread statistics of a score list, plus boxplot fences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub min: f64,
    pub q1: f64,
    pub q3: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub n: usize,
    pub n_outliers: usize,
}

/// Linear interpolation between order statistics at position `p·(n−1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Summarizes finite scores. Infinite PSNR values must be filtered out
/// (and counted) by the caller.
pub fn summarize(scores: &[f64]) -> Result<MetricsSummary, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Summation over the sorted order keeps the mean permutation-invariant.
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - FENCE_IQR * iqr;
    let upper_fence = q3 + FENCE_IQR * iqr;
    let n_outliers = sorted
        .iter()
        .filter(|&&v| v < lower_fence || v > upper_fence)
        .count();
    Ok(MetricsSummary {
        mean,
        median: quantile(&sorted, 0.5),
        max: sorted[n - 1],
        min: sorted[0],
        q1,
        q3,
        lower_fence,
        upper_fence,
        n,
        n_outliers,
    })
}

/// Splits off infinite values, returning the finite ones and the count of
/// the rest.
pub fn partition_finite(scores: &[f64]) -> (Vec<f64>, usize) {
    let finite: Vec<f64> = scores.iter().copied().filter(|v| v.is_finite()).collect();
    let n_inf = scores.len() - finite.len();
    (finite, n_inf)
}
