//! Error-distribution-augmented sampler for model criticism.
//!
//! Augments the parameters with a per-statistic error vector tau whose
//! posterior should center on zero when the model reproduces the observed
//! summaries. The data-matching term is the most conservative of the R
//! per-statistic kernel density estimates of the replicate errors
//! `T_r(x^s) - T_r(y)`, smoothed by a biweight kernel with bandwidth twice
//! the replicate interquartile range, against a zero-centered Laplace prior
//! on each tau component.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{GenerativeModel, ParamVector, ProposalDistribution, SummaryVector};
use crate::rng::RandomStream;
use crate::{Error, Result};

use super::{
    init_stream_id, metropolis_accept, mh_log_ratio, sim_stream_id, ChainTrace, Phase,
    MAX_CHAIN_STREAM, MAX_REPLICATES, MAX_STEPS,
};

/// Configuration of the error-augmented target and its tau moves.
#[derive(Clone, Debug)]
pub struct ErrorModelConfig {
    /// Standard deviation of the Gaussian random walk on each tau component.
    pub tau_proposal_scale: f64,
    /// Laplace prior scales, one per summary statistic.
    pub tau_prior_scales: Vec<f64>,
    /// Replicate dataset count S (at least 2; the bandwidth needs spread).
    pub replicates: usize,
    /// Lower bound applied when all S replicate errors coincide.
    pub bandwidth_floor: f64,
}

impl ErrorModelConfig {
    pub fn new(
        tau_proposal_scale: f64,
        tau_prior_scales: Vec<f64>,
        replicates: usize,
    ) -> Result<Self> {
        let cfg = Self {
            tau_proposal_scale,
            tau_prior_scales,
            replicates,
            bandwidth_floor: 1e-9,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau_proposal_scale.is_finite() && self.tau_proposal_scale > 0.0) {
            return Err(Error::Config(format!(
                "tau proposal scale must be positive, got {}",
                self.tau_proposal_scale
            )));
        }
        if self.tau_prior_scales.is_empty()
            || self
                .tau_prior_scales
                .iter()
                .any(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(Error::Config(
                "tau prior scales must be positive, one per summary statistic".into(),
            ));
        }
        if self.replicates < 2 {
            return Err(Error::Config(
                "error-augmented sampler needs S >= 2 replicates for the bandwidth".into(),
            ));
        }
        if self.replicates >= MAX_REPLICATES {
            return Err(Error::Config(format!(
                "replicate count S must be below {MAX_REPLICATES}"
            )));
        }
        if !(self.bandwidth_floor.is_finite() && self.bandwidth_floor > 0.0) {
            return Err(Error::Config("bandwidth floor must be positive".into()));
        }
        Ok(())
    }
}

/// Laplace log density with scale `delta`, centered at zero.
pub fn laplace_log_density(x: f64, delta: f64) -> f64 {
    -x.abs() / delta - (2.0 * delta).ln()
}

/// Joint Metropolis-Hastings over (theta, x_1..S, tau); the trace records
/// tau per step, and its epsilon column carries the smallest current
/// bandwidth.
pub fn error_augmented_run(
    model: &dyn GenerativeModel,
    proposal: &dyn ProposalDistribution,
    config: &ErrorModelConfig,
    observed: &SummaryVector,
    theta0: &ParamVector,
    n_iter: usize,
    rng: &mut RandomStream,
) -> Result<ChainTrace> {
    config.validate()?;
    let r_dim = model.summary_dim();
    if config.tau_prior_scales.len() != r_dim {
        return Err(Error::DimensionMismatch(format!(
            "{} tau prior scales for {} summary statistics",
            config.tau_prior_scales.len(),
            r_dim
        )));
    }
    if theta0.len() != model.param_dim() || observed.len() != r_dim {
        return Err(Error::DimensionMismatch(
            "theta0 and observed summary must match the model dimensions".into(),
        ));
    }
    if n_iter >= MAX_STEPS || rng.stream_id() >= MAX_CHAIN_STREAM {
        return Err(Error::Config(
            "iteration count or stream id out of range".into(),
        ));
    }
    if !model.prior_log_density(theta0).is_finite() {
        return Err(Error::Config(
            "theta0 must have finite prior log-density".into(),
        ));
    }

    let seed = rng.seed();
    let chain = rng.stream_id();
    let s_count = config.replicates;
    let mut floored_warned = false;

    // Initial replicate errors; tau starts at the per-statistic medians so
    // every kernel density estimate is non-zero from the first step.
    let mut theta = theta0.clone();
    let mut lp = model.prior_log_density(&theta);
    let mut errors = simulate_errors(model, &theta, observed, s_count, seed, chain, 0, true);
    let mut bandwidths = compute_bandwidths(&errors, config.bandwidth_floor, &mut floored_warned);
    let mut tau: Vec<f64> = errors.iter().map(|e| median(e)).collect();
    let mut log_kde = min_log_kde(&errors, &bandwidths, &tau);
    if log_kde == f64::NEG_INFINITY {
        return Err(Error::InitializationFailed { attempts: 1 });
    }

    let mut trace = ChainTrace::with_capacity(model.param_dim(), r_dim, n_iter, seed, chain, None);
    let symmetric = proposal.is_symmetric();
    let log_tau_prior = |tau: &[f64]| -> f64 {
        tau.iter()
            .zip(&config.tau_prior_scales)
            .map(|(t, d)| laplace_log_density(*t, *d))
            .sum()
    };

    for t in 1..=n_iter {
        let theta_prop = proposal.sample(&theta, rng);
        let lp_prop = model.prior_log_density(&theta_prop);
        if lp_prop == f64::NEG_INFINITY {
            record(&mut trace, &theta, &bandwidths, &errors, &tau, false);
            continue;
        }

        let errors_prop = simulate_errors(
            model,
            &theta_prop,
            observed,
            s_count,
            seed,
            chain,
            t as u64,
            false,
        );
        let bw_prop = compute_bandwidths(&errors_prop, config.bandwidth_floor, &mut floored_warned);
        let tau_prop: Vec<f64> = tau
            .iter()
            .map(|v| v + config.tau_proposal_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let log_kde_prop = min_log_kde(&errors_prop, &bw_prop, &tau_prop);

        let (lq_fwd, lq_rev) = if symmetric {
            (0.0, 0.0)
        } else {
            (
                proposal.log_density(&theta, &theta_prop),
                proposal.log_density(&theta_prop, &theta),
            )
        };

        // The tau random walk is symmetric and the replicate-dataset
        // proposal terms cancel against the target, as in the plain sampler.
        let num = log_kde_prop + lp_prop + log_tau_prior(&tau_prop) + lq_rev;
        let den = log_kde + lp + log_tau_prior(&tau) + lq_fwd;
        let accepted = metropolis_accept(mh_log_ratio(num, den), rng);
        if accepted {
            theta = theta_prop;
            lp = lp_prop;
            errors = errors_prop;
            bandwidths = bw_prop;
            tau = tau_prop;
            log_kde = log_kde_prop;
        }
        record(&mut trace, &theta, &bandwidths, &errors, &tau, accepted);
    }

    Ok(trace)
}

fn record(
    trace: &mut ChainTrace,
    theta: &ParamVector,
    bandwidths: &[f64],
    errors: &[Vec<f64>],
    tau: &[f64],
    accepted: bool,
) {
    let min_bw = bandwidths.iter().cloned().fold(f64::INFINITY, f64::min);
    // Euclidean distance of the first replicate's summary to the observed
    // one, reconstructed from its errors.
    let rho = errors.iter().map(|e| e[0] * e[0]).sum::<f64>().sqrt();
    trace.push(
        theta.values(),
        min_bw,
        rho,
        accepted,
        Phase::Sampling,
        Some(tau),
    );
}

/// errors[r][s] = T_r(x^s) - T_r(y).
#[allow(clippy::too_many_arguments)]
fn simulate_errors(
    model: &dyn GenerativeModel,
    theta: &ParamVector,
    observed: &SummaryVector,
    s_count: usize,
    seed: u64,
    chain: u64,
    step: u64,
    init: bool,
) -> Vec<Vec<f64>> {
    let r_dim = model.summary_dim();
    let mut errors = vec![Vec::with_capacity(s_count); r_dim];
    for rep in 0..s_count {
        let id = if init {
            init_stream_id(chain, step, rep as u64)
        } else {
            sim_stream_id(chain, step, rep as u64)
        };
        let mut sim_rng = RandomStream::new(seed, id);
        let summary = model.simulate_summary(theta, &mut sim_rng);
        for (r, e) in errors.iter_mut().enumerate() {
            e.push(summary.values()[r] - observed.values()[r]);
        }
    }
    errors
}

/// Twice the interquartile range per statistic, floored when degenerate.
fn compute_bandwidths(errors: &[Vec<f64>], floor: f64, warned: &mut bool) -> Vec<f64> {
    errors
        .iter()
        .map(|e| {
            let mut sorted = e.clone();
            sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite errors"));
            let bw = 2.0 * (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25));
            if bw > floor {
                bw
            } else {
                if !*warned {
                    log::warn!(
                        "replicate errors are degenerate; flooring kernel bandwidth at {floor}"
                    );
                    *warned = true;
                }
                floor
            }
        })
        .collect()
}

/// min over statistics of the log biweight KDE of the replicate errors,
/// evaluated at that statistic's tau component.
fn min_log_kde(errors: &[Vec<f64>], bandwidths: &[f64], tau: &[f64]) -> f64 {
    let mut min = f64::INFINITY;
    for ((e, bw), t) in errors.iter().zip(bandwidths).zip(tau) {
        let v = log_biweight_kde(e, *bw, *t);
        if v < min {
            min = v;
        }
        if min == f64::NEG_INFINITY {
            break;
        }
    }
    min
}

/// log of (1/(S h)) sum_s K((x - e_s)/h) with the quartic kernel
/// K(u) = (15/16)(1 - u^2)^2 on |u| < 1.
fn log_biweight_kde(points: &[f64], bandwidth: f64, x: f64) -> f64 {
    debug_assert!(bandwidth > 0.0);
    let mut sum = 0.0;
    for p in points {
        let u = (x - p) / bandwidth;
        if u.abs() < 1.0 {
            let w = 1.0 - u * u;
            sum += w * w;
        }
    }
    if sum == 0.0 {
        return f64::NEG_INFINITY;
    }
    (15.0 / 16.0 * sum / (points.len() as f64 * bandwidth)).ln()
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    quantile_sorted(&sorted, 0.5)
}

/// Linearly interpolated quantile of a sorted slice (R type-7).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let idx = q * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_density_at_mode() {
        // exp(0) / (2 * 0.75) = 2/3.
        let v = laplace_log_density(0.0, 0.75).exp();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn biweight_kde_integrates_to_one() {
        let points = [0.0, 0.4, -0.3, 1.1];
        let h = 0.8;
        let (lo, hi, n) = (-3.0, 3.0, 60_000);
        let step = (hi - lo) / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * step;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            mass += w * log_biweight_kde(&points, h, x).exp();
        }
        mass *= step;
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn kde_zero_outside_support() {
        assert_eq!(log_biweight_kde(&[0.0, 0.1], 0.5, 5.0), f64::NEG_INFINITY);
    }

    #[test]
    fn quantiles_and_median() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&sorted, 0.5), 2.5);
        assert_eq!(quantile_sorted(&sorted, 0.0), 1.0);
        assert_eq!(quantile_sorted(&sorted, 1.0), 4.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn degenerate_errors_floored() {
        let errors = vec![vec![0.5; 10]];
        let mut warned = false;
        let bw = compute_bandwidths(&errors, 1e-9, &mut warned);
        assert_eq!(bw[0], 1e-9);
        assert!(warned);
    }

    #[test]
    fn config_validation() {
        assert!(ErrorModelConfig::new(0.25, vec![0.75, 0.75], 50).is_ok());
        assert!(ErrorModelConfig::new(0.25, vec![0.75], 1).is_err());
        assert!(ErrorModelConfig::new(0.0, vec![0.75], 10).is_err());
        assert!(ErrorModelConfig::new(0.25, vec![-0.75], 10).is_err());
    }
}
