//! Sampler and approximation diagnostics.
//!
//! Kolmogorov-Smirnov accuracy against analytic references, acceptance
//! rates, sojourn lengths above a threshold (tail persistence) and highest
//! posterior density intervals over empirical samples.

use crate::sampler::{ChainTrace, PhaseFilter};
use crate::special::{gamma_cdf, normal_cdf};
use crate::{Error, Result};

/// A reference CDF to compare posterior samples against.
pub struct ReferenceDistribution {
    cdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl ReferenceDistribution {
    pub fn new(label: impl Into<String>, cdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            cdf: Box::new(cdf),
            label: label.into(),
        }
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::Config(format!(
                "gamma reference needs positive shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(Self::new(format!("Gamma({shape},{rate})"), move |x| {
            gamma_cdf(x, shape, rate)
        }))
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if sd.is_nan() || sd <= 0.0 {
            return Err(Error::Config(format!(
                "normal reference needs positive sd, got {sd}"
            )));
        }
        Ok(Self::new(format!("N({mean},{sd}^2)"), move |x| {
            normal_cdf(x, mean, sd)
        }))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl std::fmt::Debug for ReferenceDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceDistribution")
            .field("label", &self.label)
            .finish()
    }
}

/// One-sample Kolmogorov-Smirnov distance between an empirical sample and a
/// reference CDF: `max_i max(|i/n - F(x_(i))|, |(i-1)/n - F(x_(i))|)`.
pub fn ks_statistic(sample: &[f64], reference: &ReferenceDistribution) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample("KS statistic needs data".into()));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KS sample value".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = reference.cdf(*x);
        let upper = ((i + 1) as f64 / n - f).abs();
        let lower = (i as f64 / n - f).abs();
        d = d.max(upper).max(lower);
    }
    Ok(d)
}

/// Fraction of accepted steps among the records matching the phase filter.
pub fn acceptance_rate(trace: &ChainTrace, filter: PhaseFilter) -> Result<f64> {
    let mut total = 0usize;
    let mut accepted = 0usize;
    for (flag, phase) in trace.accepted_flags().iter().zip(trace.phases()) {
        if filter.matches(*phase) {
            total += 1;
            accepted += *flag as usize;
        }
    }
    if total == 0 {
        return Err(Error::EmptySample(
            "no trace records match the phase filter".into(),
        ));
    }
    Ok(accepted as f64 / total as f64)
}

/// Lengths of maximal runs of consecutive records whose parameter component
/// stays above `kappa`; runs truncated by the trace boundaries are counted.
pub fn sojourn_lengths(trace: &ChainTrace, component: usize, kappa: f64) -> Vec<usize> {
    sojourn_lengths_of(trace.component(component), kappa)
}

/// Series form of [`sojourn_lengths`].
pub fn sojourn_lengths_of(series: impl IntoIterator<Item = f64>, kappa: f64) -> Vec<usize> {
    let mut lengths = Vec::new();
    let mut run = 0usize;
    for v in series {
        if v > kappa {
            run += 1;
        } else if run > 0 {
            lengths.push(run);
            run = 0;
        }
    }
    if run > 0 {
        lengths.push(run);
    }
    lengths
}

/// Shortest contiguous interval `[x_(i), x_(i+m)]`, `m = ceil(mass * n)`,
/// covering at least `mass` of the sample.
pub fn hpd_interval(sample: &[f64], mass: f64) -> Result<(f64, f64)> {
    if sample.len() < 20 {
        return Err(Error::EmptySample(format!(
            "HPD interval needs at least 20 points, got {}",
            sample.len()
        )));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::Config(format!(
            "HPD mass must be in (0,1), got {mass}"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("HPD sample value".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    let m = ((mass * n as f64).ceil() as usize).min(n - 1);
    let mut best = (sorted[0], sorted[m]);
    let mut width = best.1 - best.0;
    for i in 1..n - m {
        let w = sorted[i + m] - sorted[i];
        if w < width {
            width = w;
            best = (sorted[i], sorted[i + m]);
        }
    }
    Ok(best)
}
