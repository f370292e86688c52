//! Summaries over bootstrap sample vectors: percentile intervals, one-sided
//! p-values, and structured comparison reports.

use serde::{Deserialize, Serialize};

use crate::model::{Design, DesignSpec};
use crate::{Error, Result};

/// Empirical quantile with linear interpolation at position `h = (n-1)*p`
/// over the sorted samples (zero-based).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Equal-tailed percentile interval at `level`.
pub fn percentile_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&sorted, alpha), quantile(&sorted, 1.0 - alpha)))
}

/// One-sided p-value for H0: delta <= 0, as the fraction of draws <= 0.
/// Ties at exactly zero count toward the null.
pub fn p_value_leq_zero(delta_samples: &[f64]) -> f64 {
    let k = delta_samples.iter().filter(|&&d| d <= 0.0).count();
    k as f64 / delta_samples.len() as f64
}

/// Tests a bootstrapped model against a fixed baseline value.
///
/// Returns the p-value for H0: theta <= baseline (fraction of draws at or
/// below the baseline) and the baseline's placement, its empirical CDF value
/// within the sample vector. The two numbers coincide; placement is reported
/// separately for narrative use alongside the CI.
pub fn baseline_comparison(samples: &[f64], baseline: f64) -> (f64, f64) {
    let k = samples.iter().filter(|&&s| s <= baseline).count();
    let frac = k as f64 / samples.len() as f64;
    (frac, frac)
}

/// Histogram of the sample vector with Freedman-Diaconis bin width, clamped
/// to at least one bin, edges snapped to the sample range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn histogram(samples: &[f64]) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let n = samples.len() as f64;
    let fd_width = 2.0 * iqr / n.cbrt();
    let range = hi - lo;
    let n_bins = if range == 0.0 || fd_width == 0.0 {
        1
    } else {
        ((range / fd_width).ceil() as usize).max(1)
    };
    let width = if range == 0.0 { 1.0 } else { range / n_bins as f64 };
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| {
            if i == n_bins && range > 0.0 {
                hi
            } else {
                lo + i as f64 * width
            }
        })
        .collect();
    let mut counts = vec![0u64; n_bins];
    for &s in samples {
        // min() makes the last bin right-closed.
        let b = if range == 0.0 {
            0
        } else {
            (((s - lo) / width) as usize).min(n_bins - 1)
        };
        counts[b] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}

/// Per-arm point estimates for a comparison report.
#[derive(Debug, Clone, Copy)]
pub struct PerArm {
    pub theta_base: f64,
    pub theta_intervention: f64,
}

/// Structured analysis output; serializes to a stable JSON object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub design: DesignSpec,
    /// Theta-hat for single designs, delta-hat for comparisons.
    pub point_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta_intervention: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    /// Draws exactly at zero, which the <=-rule counts toward the null.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ties_at_zero: Option<usize>,
    pub nboot: usize,
    pub sample_histogram: Histogram,
}

/// Builds the report for one analysis. For comparison designs, `samples` are
/// the delta draws and `per_arm` carries the arm-level point estimates.
pub fn summarize(
    point: f64,
    samples: &[f64],
    design: &DesignSpec,
    per_arm: Option<PerArm>,
) -> Result<ComparisonReport> {
    if samples.len() != design.nboot {
        return Err(Error::LengthMismatch {
            left: samples.len(),
            right: design.nboot,
        });
    }
    let (ci_lower, ci_upper) = percentile_ci(samples, design.ci_level)?;
    let tests_hypothesis = design.design != Design::Single;
    let p_value = tests_hypothesis.then(|| p_value_leq_zero(samples));
    let ties_at_zero =
        tests_hypothesis.then(|| samples.iter().filter(|&&d| d == 0.0).count());
    let (theta_base, theta_intervention, delta) = match per_arm {
        Some(arms) => (
            Some(arms.theta_base),
            Some(arms.theta_intervention),
            Some(arms.theta_intervention - arms.theta_base),
        ),
        None => (None, None, None),
    };
    Ok(ComparisonReport {
        design: design.clone(),
        point_estimate: point,
        theta_base,
        theta_intervention,
        delta,
        ci_lower,
        ci_upper,
        p_value,
        ties_at_zero,
        nboot: design.nboot,
        sample_histogram: histogram(samples)?,
    })
}
