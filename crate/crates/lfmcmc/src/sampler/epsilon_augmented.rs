//! Tolerance-augmented sampler: epsilon as a tempering coordinate.
//!
//! The chain moves jointly over (theta, x, epsilon) with a pseudo-prior on
//! the tolerance that favours small values; large-epsilon excursions keep
//! the chain mixing and the final sample is read off by filtering records
//! to `epsilon <= epsilon*`. Because epsilon varies, the kernel's
//! `epsilon^-R` normalization enters the ratio, so only kernels with that
//! normalization available (uniform, gaussian) are accepted.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::distance::DistanceMetric;
use crate::kernel::{Kernel, WeightSpec};
use crate::model::{GenerativeModel, ParamVector, ProposalDistribution, SummaryVector};
use crate::rng::RandomStream;
use crate::{Error, Result};

use super::{
    init_stream_id, metropolis_accept, mh_log_ratio, sim_stream_id, ChainTrace, Phase,
    MAX_CHAIN_STREAM, MAX_STEPS,
};

/// Joint Metropolis-Hastings over (theta, x, epsilon): theta moves by `proposal`,
/// x by fresh simulation, epsilon by a log-normal random walk against an
/// exponential pseudo-prior with rate `epsilon_prior_rate`.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_augmented_run(
    model: &dyn GenerativeModel,
    proposal: &dyn ProposalDistribution,
    kernel: Kernel,
    metric: &DistanceMetric,
    epsilon_prior_rate: f64,
    epsilon_proposal_scale: f64,
    observed: &SummaryVector,
    theta0: &ParamVector,
    n_iter: usize,
    rng: &mut RandomStream,
) -> Result<ChainTrace> {
    if !kernel.supports_epsilon_normalization() {
        return Err(Error::Config(format!(
            "kernel {} has no epsilon-dependent normalization; the tolerance-augmented \
             sampler needs the uniform or gaussian kernel",
            kernel.name()
        )));
    }
    if !(epsilon_prior_rate.is_finite() && epsilon_prior_rate > 0.0) {
        return Err(Error::Config(format!(
            "epsilon pseudo-prior rate must be positive, got {epsilon_prior_rate}"
        )));
    }
    if !(epsilon_proposal_scale.is_finite() && epsilon_proposal_scale > 0.0) {
        return Err(Error::Config(format!(
            "epsilon proposal scale must be positive, got {epsilon_proposal_scale}"
        )));
    }
    if theta0.len() != model.param_dim()
        || observed.len() != model.summary_dim()
        || metric.dim() != model.summary_dim()
    {
        return Err(Error::DimensionMismatch(
            "theta0, observed summary and metric must match the model dimensions".into(),
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
    // The weight spec's stored tolerance is unused here; every evaluation passes
    // the current coordinate explicitly.
    let spec = WeightSpec::new(kernel, metric.clone(), 1.0)?;
    let log_eps_prior = |eps: f64| epsilon_prior_rate.ln() - epsilon_prior_rate * eps;

    // Initial state: simulate once and start the tolerance at the realized
    // distance, which has non-zero weight for both supported kernels.
    let mut theta = theta0.clone();
    let mut lp = model.prior_log_density(&theta);
    let mut sim_rng = RandomStream::new(seed, init_stream_id(chain, 0, 0));
    let s0 = model.simulate_summary(&theta, &mut sim_rng);
    let mut rho = metric.distance(&s0, observed);
    let mut eps = rho.max(1e-12);

    let mut trace = ChainTrace::with_capacity(model.param_dim(), 0, n_iter, seed, chain, None);
    let symmetric = proposal.is_symmetric();

    for t in 1..=n_iter {
        let theta_prop = proposal.sample(&theta, rng);
        let lp_prop = model.prior_log_density(&theta_prop);
        if lp_prop == f64::NEG_INFINITY {
            trace.push(theta.values(), eps, rho, false, Phase::Sampling, None);
            continue;
        }

        let mut sim_rng = RandomStream::new(seed, sim_stream_id(chain, t as u64, 0));
        let s_prop = model.simulate_summary(&theta_prop, &mut sim_rng);
        let rho_prop = metric.distance(&s_prop, observed);

        let z: f64 = rng.sample(StandardNormal);
        let eps_prop = eps * (epsilon_proposal_scale * z).exp();

        let (lq_fwd, lq_rev) = if symmetric {
            (0.0, 0.0)
        } else {
            (
                proposal.log_density(&theta, &theta_prop),
                proposal.log_density(&theta_prop, &theta),
            )
        };

        // Log-normal random-walk correction for the epsilon move is
        // ln(eps_prop) - ln(eps), folded into the target terms.
        let num = spec.log_weight_normalized_at(eps_prop, rho_prop)
            + lp_prop
            + log_eps_prior(eps_prop)
            + lq_rev
            + eps_prop.ln();
        let den =
            spec.log_weight_normalized_at(eps, rho) + lp + log_eps_prior(eps) + lq_fwd + eps.ln();

        let accepted = metropolis_accept(mh_log_ratio(num, den), rng);
        if accepted {
            theta = theta_prop;
            lp = lp_prop;
            rho = rho_prop;
            eps = eps_prop;
        }
        trace.push(theta.values(), eps, rho, accepted, Phase::Sampling, None);
    }

    Ok(trace)
}
