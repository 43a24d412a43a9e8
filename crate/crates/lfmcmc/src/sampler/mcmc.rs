//! The LF-MCMC chain and its S-replicate generalization.
//!
//! Each step proposes a parameter from `q`, simulates S replicate datasets
//! at the proposal (one per derived stream), and accepts with probability
//! `min(1, ratio)` where the intractable likelihoods cancel and the kernel
//! term is the log mean replicate weight. With S = 1 the replicate sampler
//! is the plain LF-MCMC algorithm; both entry points share this engine, so
//! their traces are bit-identical under a shared stream.

use crate::kernel::WeightSpec;
use crate::model::{GenerativeModel, ParamVector, ProposalDistribution, SummaryVector};
use crate::rng::RandomStream;
use crate::schedule::{EpsilonSchedule, ScheduleState};
use crate::{Error, Result};

use super::{
    init_stream_id, log_mean_weight, metropolis_accept, mh_log_ratio, sim_stream_id, ChainState,
    ChainTrace, InitStrategy, Phase, MAX_CHAIN_STREAM, MAX_REPLICATES, MAX_STEPS,
};

/// Knobs that rarely change between runs.
#[derive(Clone, Copy, Debug, Default)]
pub struct McmcOptions {
    pub init: InitStrategy,
}

/// One simulated dataset per step (Table-2 sampler).
#[allow(clippy::too_many_arguments)]
pub fn lf_mcmc_run(
    model: &dyn GenerativeModel,
    proposal: &dyn ProposalDistribution,
    spec: &WeightSpec,
    schedule: &EpsilonSchedule,
    observed: &SummaryVector,
    theta0: &ParamVector,
    n_iter: usize,
    rng: &mut RandomStream,
) -> Result<ChainTrace> {
    replicate_mcmc_run_with(
        model,
        proposal,
        spec,
        schedule,
        observed,
        theta0,
        n_iter,
        1,
        &McmcOptions::default(),
        rng,
    )
}

/// S replicate simulations per step; the kernel term in the acceptance
/// ratio is the average replicate weight.
#[allow(clippy::too_many_arguments)]
pub fn replicate_mcmc_run(
    model: &dyn GenerativeModel,
    proposal: &dyn ProposalDistribution,
    spec: &WeightSpec,
    schedule: &EpsilonSchedule,
    observed: &SummaryVector,
    theta0: &ParamVector,
    n_iter: usize,
    replicates: usize,
    rng: &mut RandomStream,
) -> Result<ChainTrace> {
    replicate_mcmc_run_with(
        model,
        proposal,
        spec,
        schedule,
        observed,
        theta0,
        n_iter,
        replicates,
        &McmcOptions::default(),
        rng,
    )
}

/// As [`replicate_mcmc_run`] with explicit initialization options.
#[allow(clippy::too_many_arguments)]
pub fn replicate_mcmc_run_with(
    model: &dyn GenerativeModel,
    proposal: &dyn ProposalDistribution,
    spec: &WeightSpec,
    schedule: &EpsilonSchedule,
    observed: &SummaryVector,
    theta0: &ParamVector,
    n_iter: usize,
    replicates: usize,
    options: &McmcOptions,
    rng: &mut RandomStream,
) -> Result<ChainTrace> {
    validate(
        model, spec, schedule, observed, theta0, n_iter, replicates, rng,
    )?;
    if let InitStrategy::PriorRetry { .. } = options.init {
        if !model.has_proper_prior() {
            return Err(Error::Config(
                "prior-retry initialization needs a proper prior".into(),
            ));
        }
    }

    let seed = rng.seed();
    let chain = rng.stream_id();
    let metric = spec.metric();
    let target = schedule.target();

    // Find a starting state with non-zero weight.
    let budget = match options.init {
        InitStrategy::SimulateRetry { budget } | InitStrategy::PriorRetry { budget } => budget,
    };
    let mut state: Option<ChainState> = None;
    let mut lp_current = f64::NEG_INFINITY;
    for attempt in 0..budget.max(1) {
        let theta = match options.init {
            InitStrategy::SimulateRetry { .. } => theta0.clone(),
            InitStrategy::PriorRetry { .. } => {
                model.sample_prior(rng).expect("proper prior checked above")
            }
        };
        let mut summaries = Vec::with_capacity(replicates);
        let mut rhos = Vec::with_capacity(replicates);
        for rep in 0..replicates {
            let mut sim_rng =
                RandomStream::new(seed, init_stream_id(chain, attempt as u64, rep as u64));
            let s = model.simulate_summary(&theta, &mut sim_rng);
            rhos.push(metric.distance(&s, observed));
            summaries.push(s);
        }
        let rho_min = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
        let epsilon = schedule.initial_epsilon(rho_min);
        let lw: Vec<f64> = rhos
            .iter()
            .map(|r| spec.log_weight_at(epsilon, *r))
            .collect();
        let log_weight = log_mean_weight(&lw);
        if log_weight > f64::NEG_INFINITY {
            lp_current = model.prior_log_density(&theta);
            state = Some(ChainState {
                theta,
                summaries,
                rhos,
                log_weight,
                epsilon,
                tau: None,
            });
            break;
        }
    }
    let mut state = state.ok_or(Error::InitializationFailed { attempts: budget })?;

    let mut trace =
        ChainTrace::with_capacity(model.param_dim(), 0, n_iter, seed, chain, Some(target));

    let symmetric = proposal.is_symmetric();
    let mut proposed_summaries: Vec<SummaryVector> = Vec::with_capacity(replicates);
    let mut proposed_rhos: Vec<f64> = Vec::with_capacity(replicates);
    let mut lw_buf: Vec<f64> = Vec::with_capacity(replicates);

    for t in 1..=n_iter {
        let theta_prop = proposal.sample(&state.theta, rng);
        let lp_prop = model.prior_log_density(&theta_prop);

        if lp_prop == f64::NEG_INFINITY {
            // Off-support proposal: automatic rejection without simulating.
            let eps = schedule.next_epsilon(&ScheduleState {
                t,
                eps_prev: state.epsilon,
                rho_proposed: f64::INFINITY,
                accepted: false,
            });
            update_state_epsilon(&mut state, spec, eps, &mut lw_buf);
            record(&mut trace, &state, false, target);
            continue;
        }

        proposed_summaries.clear();
        proposed_rhos.clear();
        for rep in 0..replicates {
            let mut sim_rng = RandomStream::new(seed, sim_stream_id(chain, t as u64, rep as u64));
            let s = model.simulate_summary(&theta_prop, &mut sim_rng);
            proposed_rhos.push(metric.distance(&s, observed));
            proposed_summaries.push(s);
        }
        let rho_min = proposed_rhos.iter().cloned().fold(f64::INFINITY, f64::min);
        let eps_step = schedule.step_epsilon(t, state.epsilon, rho_min);

        lw_buf.clear();
        lw_buf.extend(
            proposed_rhos
                .iter()
                .map(|r| spec.log_weight_at(eps_step, *r)),
        );
        let lw_prop = log_mean_weight(&lw_buf);
        lw_buf.clear();
        lw_buf.extend(state.rhos.iter().map(|r| spec.log_weight_at(eps_step, *r)));
        let lw_cur = log_mean_weight(&lw_buf);

        let (lq_fwd, lq_rev) = if symmetric {
            (0.0, 0.0)
        } else {
            (
                proposal.log_density(&state.theta, &theta_prop),
                proposal.log_density(&theta_prop, &state.theta),
            )
        };

        let log_ratio = mh_log_ratio(lw_prop + lp_prop + lq_rev, lw_cur + lp_current + lq_fwd);
        let accepted = metropolis_accept(log_ratio, rng);

        let eps = schedule.next_epsilon(&ScheduleState {
            t,
            eps_prev: state.epsilon,
            rho_proposed: rho_min,
            accepted,
        });

        if accepted {
            state.theta = theta_prop;
            std::mem::swap(&mut state.summaries, &mut proposed_summaries);
            std::mem::swap(&mut state.rhos, &mut proposed_rhos);
            lp_current = lp_prop;
        }
        update_state_epsilon(&mut state, spec, eps, &mut lw_buf);
        record(&mut trace, &state, accepted, target);
    }

    Ok(trace)
}

fn update_state_epsilon(state: &mut ChainState, spec: &WeightSpec, eps: f64, buf: &mut Vec<f64>) {
    state.epsilon = eps;
    buf.clear();
    buf.extend(state.rhos.iter().map(|r| spec.log_weight_at(eps, *r)));
    state.log_weight = log_mean_weight(buf);
}

fn record(trace: &mut ChainTrace, state: &ChainState, accepted: bool, target: f64) {
    let phase = if state.epsilon > target {
        Phase::BurnIn
    } else {
        Phase::Sampling
    };
    trace.push(
        state.theta.values(),
        state.epsilon,
        state.rhos[0],
        accepted,
        phase,
        None,
    );
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn validate(
    model: &dyn GenerativeModel,
    spec: &WeightSpec,
    schedule: &EpsilonSchedule,
    observed: &SummaryVector,
    theta0: &ParamVector,
    n_iter: usize,
    replicates: usize,
    rng: &RandomStream,
) -> Result<()> {
    if theta0.len() != model.param_dim() {
        return Err(Error::DimensionMismatch(format!(
            "theta0 has {} components, model has {}",
            theta0.len(),
            model.param_dim()
        )));
    }
    if observed.len() != model.summary_dim() {
        return Err(Error::DimensionMismatch(format!(
            "observed summary has {} components, model produces {}",
            observed.len(),
            model.summary_dim()
        )));
    }
    if spec.metric().dim() != model.summary_dim() {
        return Err(Error::DimensionMismatch(format!(
            "metric dimension {} does not match summary dimension {}",
            spec.metric().dim(),
            model.summary_dim()
        )));
    }
    if replicates == 0 {
        return Err(Error::Config("replicate count S must be at least 1".into()));
    }
    if replicates >= MAX_REPLICATES {
        return Err(Error::Config(format!(
            "replicate count S must be below {MAX_REPLICATES}"
        )));
    }
    if n_iter >= MAX_STEPS {
        return Err(Error::Config(format!(
            "iteration count must be below {MAX_STEPS}"
        )));
    }
    if rng.stream_id() >= MAX_CHAIN_STREAM {
        return Err(Error::Config(format!(
            "chain stream id must be below {MAX_CHAIN_STREAM}"
        )));
    }
    if schedule.is_self_scaling() && !spec.kernel().supports_self_scaling() {
        return Err(Error::Config(format!(
            "self_scaling schedule snaps the tolerance onto the proposed distance, where the {} \
             kernel has zero weight; use the uniform or gaussian kernel",
            spec.kernel().name()
        )));
    }
    if !model.prior_log_density(theta0).is_finite() {
        return Err(Error::Config(
            "theta0 must have finite prior log-density".into(),
        ));
    }
    Ok(())
}
