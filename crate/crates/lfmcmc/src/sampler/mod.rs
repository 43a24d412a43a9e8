//! Likelihood-free samplers.
//!
//! Four ways to draw from the augmented posterior without evaluating the
//! likelihood: prior rejection sampling, the LF-MCMC chain (one simulated
//! dataset per step), the S-replicate chain (averaging kernel weights over
//! replicate simulations), a tolerance-augmented chain that treats the
//! tolerance as a tempering coordinate, and an error-distribution-augmented
//! chain for model criticism.
//!
//! One chain is strictly sequential; replicate chains may run concurrently,
//! each owning a private [`RandomStream`](crate::rng::RandomStream), and
//! every replicate simulation inside a step draws from its own derived
//! stream, so traces depend only on `(seed, stream id, configuration)`.

mod epsilon_augmented;
mod error_augmented;
mod mcmc;
mod rejection;

pub use epsilon_augmented::epsilon_augmented_run;
pub use error_augmented::{error_augmented_run, ErrorModelConfig};
pub use mcmc::{lf_mcmc_run, replicate_mcmc_run, replicate_mcmc_run_with, McmcOptions};
pub use rejection::{rejection_sample, RejectionResult};

use std::io::{self, Write};

use rand::Rng;

use crate::model::{ParamVector, SummaryVector};
use crate::rng::RandomStream;

/// Whether a record was taken before or after the tolerance reached its
/// target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    BurnIn,
    Sampling,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::BurnIn => "burn_in",
            Phase::Sampling => "sampling",
        }
    }
}

/// Record selector for trace summaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseFilter {
    All,
    BurnIn,
    Sampling,
}

impl PhaseFilter {
    pub fn matches(&self, phase: Phase) -> bool {
        match self {
            PhaseFilter::All => true,
            PhaseFilter::BurnIn => phase == Phase::BurnIn,
            PhaseFilter::Sampling => phase == Phase::Sampling,
        }
    }
}

/// Current state of one chain.
///
/// `log_weight` is the kernel term at `epsilon`; chains only ever occupy
/// states whose weight was finite when they were accepted.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub theta: ParamVector,
    pub summaries: Vec<SummaryVector>,
    /// Distances of each summary in `summaries` to the observed summary.
    pub rhos: Vec<f64>,
    pub log_weight: f64,
    pub epsilon: f64,
    pub tau: Option<Vec<f64>>,
}

/// Run metadata carried alongside the per-step records.
#[derive(Clone, Debug)]
pub struct TraceMeta {
    pub seed: u64,
    pub stream_id: u64,
    /// Digest of the experiment configuration; filled in by the harness.
    pub config_digest: String,
    pub n_accepted: usize,
    pub target_epsilon: Option<f64>,
}

/// Time-indexed record of one chain, stored column-wise.
#[derive(Clone, Debug)]
pub struct ChainTrace {
    param_dim: usize,
    tau_dim: usize,
    thetas: Vec<f64>,
    epsilons: Vec<f64>,
    rhos: Vec<f64>,
    accepted: Vec<bool>,
    phases: Vec<Phase>,
    taus: Vec<f64>,
    pub meta: TraceMeta,
}

impl ChainTrace {
    pub(crate) fn with_capacity(
        param_dim: usize,
        tau_dim: usize,
        n_iter: usize,
        seed: u64,
        stream_id: u64,
        target_epsilon: Option<f64>,
    ) -> Self {
        Self {
            param_dim,
            tau_dim,
            thetas: Vec::with_capacity(n_iter * param_dim),
            epsilons: Vec::with_capacity(n_iter),
            rhos: Vec::with_capacity(n_iter),
            accepted: Vec::with_capacity(n_iter),
            phases: Vec::with_capacity(n_iter),
            taus: Vec::with_capacity(n_iter * tau_dim),
            meta: TraceMeta {
                seed,
                stream_id,
                config_digest: String::new(),
                n_accepted: 0,
                target_epsilon,
            },
        }
    }

    pub(crate) fn push(
        &mut self,
        theta: &[f64],
        epsilon: f64,
        rho: f64,
        accepted: bool,
        phase: Phase,
        tau: Option<&[f64]>,
    ) {
        debug_assert_eq!(theta.len(), self.param_dim);
        self.thetas.extend_from_slice(theta);
        self.epsilons.push(epsilon);
        self.rhos.push(rho);
        self.accepted.push(accepted);
        self.phases.push(phase);
        match tau {
            Some(t) => {
                debug_assert_eq!(t.len(), self.tau_dim);
                self.taus.extend_from_slice(t);
            }
            None => debug_assert_eq!(self.tau_dim, 0),
        }
        if accepted {
            self.meta.n_accepted += 1;
        }
    }

    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn tau_dim(&self) -> usize {
        self.tau_dim
    }

    pub fn theta_row(&self, t: usize) -> &[f64] {
        &self.thetas[t * self.param_dim..(t + 1) * self.param_dim]
    }

    pub fn tau_row(&self, t: usize) -> Option<&[f64]> {
        if self.tau_dim == 0 {
            None
        } else {
            Some(&self.taus[t * self.tau_dim..(t + 1) * self.tau_dim])
        }
    }

    /// One parameter component over all records.
    pub fn component(&self, comp: usize) -> impl Iterator<Item = f64> + '_ {
        assert!(comp < self.param_dim, "component out of range");
        self.thetas
            .iter()
            .skip(comp)
            .step_by(self.param_dim)
            .copied()
    }

    /// One error component over all records (error-augmented traces only).
    pub fn tau_component(&self, comp: usize) -> impl Iterator<Item = f64> + '_ {
        assert!(comp < self.tau_dim, "tau component out of range");
        self.taus.iter().skip(comp).step_by(self.tau_dim).copied()
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn accepted_flags(&self) -> &[bool] {
        &self.accepted
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Record indices surviving burn-in removal, phase filtering and
    /// thinning (keep every `thin`-th eligible record, counting from the
    /// `thin`-th). Burn-in and thinning are applied here, at summary time,
    /// never at recording time.
    pub fn kept_indices(&self, burn_in: usize, thin: usize, filter: PhaseFilter) -> Vec<usize> {
        assert!(thin >= 1, "thin must be at least 1");
        let mut kept = Vec::new();
        let mut k = 0usize;
        for t in burn_in..self.len() {
            if !filter.matches(self.phases[t]) {
                continue;
            }
            k += 1;
            if k.is_multiple_of(thin) {
                kept.push(t);
            }
        }
        kept
    }

    /// One parameter component at the kept indices.
    pub fn kept_component(
        &self,
        comp: usize,
        burn_in: usize,
        thin: usize,
        filter: PhaseFilter,
    ) -> Vec<f64> {
        assert!(comp < self.param_dim);
        self.kept_indices(burn_in, thin, filter)
            .into_iter()
            .map(|t| self.thetas[t * self.param_dim + comp])
            .collect()
    }

    /// Parameter component restricted to records whose tolerance coordinate
    /// is at most `eps_star` (tolerance-augmented traces).
    pub fn epsilon_filtered_component(&self, comp: usize, eps_star: f64) -> Vec<f64> {
        assert!(comp < self.param_dim);
        (0..self.len())
            .filter(|&t| self.epsilons[t] <= eps_star)
            .map(|t| self.thetas[t * self.param_dim + comp])
            .collect()
    }

    /// Acceptance count recomputed from the flags; must equal the metadata
    /// counter.
    pub fn recount_accepted(&self) -> usize {
        self.accepted.iter().filter(|a| **a).count()
    }

    /// Writes the per-step records as CSV with header
    /// `t,phase,accepted,epsilon,rho,theta_1..theta_d[,tau_1..tau_R]`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write!(w, "t,phase,accepted,epsilon,rho")?;
        for i in 1..=self.param_dim {
            write!(w, ",theta_{i}")?;
        }
        for i in 1..=self.tau_dim {
            write!(w, ",tau_{i}")?;
        }
        writeln!(w)?;
        for t in 0..self.len() {
            write!(
                w,
                "{},{},{},{},{}",
                t + 1,
                self.phases[t].name(),
                self.accepted[t] as u8,
                self.epsilons[t],
                self.rhos[t]
            )?;
            for v in self.theta_row(t) {
                write!(w, ",{v}")?;
            }
            if let Some(tau) = self.tau_row(t) {
                for v in tau {
                    write!(w, ",{v}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Writes the sidecar key-value metadata file.
    pub fn write_meta<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "seed = {}", self.meta.seed)?;
        writeln!(w, "stream_id = {}", self.meta.stream_id)?;
        writeln!(w, "config_digest = {}", self.meta.config_digest)?;
        writeln!(w, "n_iter = {}", self.len())?;
        writeln!(w, "n_accepted = {}", self.meta.n_accepted)?;
        writeln!(w, "param_dim = {}", self.param_dim)?;
        if let Some(target) = self.meta.target_epsilon {
            writeln!(w, "target_epsilon = {target}")?;
        }
        Ok(())
    }
}

/// How the chain finds a starting state with non-zero weight.
#[derive(Clone, Copy, Debug)]
pub enum InitStrategy {
    /// Redraw datasets at the fixed starting point until one matches.
    SimulateRetry { budget: usize },
    /// Redraw the starting point from the prior, with a fresh dataset each
    /// attempt (proper priors only).
    PriorRetry { budget: usize },
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::SimulateRetry { budget: 1000 }
    }
}

/// log((1/S) sum_s exp(log_weights[s])), stable in log space. Exactly the
/// single log weight when S = 1.
pub fn log_mean_weight(log_weights: &[f64]) -> f64 {
    debug_assert!(!log_weights.is_empty());
    let max = log_weights.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    max + (sum / log_weights.len() as f64).ln()
}

/// Log Metropolis-Hastings ratio from the assembled log target terms.
///
/// A zero-weight numerator rejects outright, even when the current state
/// has itself fallen out of support under a shrinking tolerance; a
/// zero-weight denominator with a feasible proposal accepts outright.
pub fn mh_log_ratio(log_target_proposed: f64, log_target_current: f64) -> f64 {
    if log_target_proposed == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_target_current == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    log_target_proposed - log_target_current
}

/// Accept with probability min(1, exp(log_ratio)). Always consumes exactly
/// one uniform draw.
pub fn metropolis_accept(log_ratio: f64, rng: &mut RandomStream) -> bool {
    debug_assert!(!log_ratio.is_nan(), "MH log ratio is NaN");
    rng.random::<f64>() < log_ratio.exp()
}

// Stream id layout for derived simulation streams:
//   bit 63        derived-stream flag
//   bit 62        initialization (1) vs step (0)
//   bits [61:38]  chain stream id (24 bits)
//   bits [37:8]   step index / init attempt (30 bits)
//   bits [7:0]    replicate index (8 bits)
pub(crate) const MAX_CHAIN_STREAM: u64 = 1 << 24;
pub(crate) const MAX_STEPS: usize = 1 << 30;
pub(crate) const MAX_REPLICATES: usize = 1 << 8;

pub(crate) fn sim_stream_id(chain: u64, step: u64, replicate: u64) -> u64 {
    debug_assert!(chain < MAX_CHAIN_STREAM);
    debug_assert!(step < MAX_STEPS as u64);
    debug_assert!(replicate < MAX_REPLICATES as u64);
    (1 << 63) | (chain << 38) | (step << 8) | replicate
}

pub(crate) fn init_stream_id(chain: u64, attempt: u64, replicate: u64) -> u64 {
    debug_assert!(chain < MAX_CHAIN_STREAM);
    debug_assert!(attempt < MAX_STEPS as u64);
    debug_assert!(replicate < MAX_REPLICATES as u64);
    (1 << 63) | (1 << 62) | (chain << 38) | (attempt << 8) | replicate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_mean_weight_single_is_exact() {
        for w in [-3.25, 0.0, -1e-9, -700.0] {
            assert_eq!(log_mean_weight(&[w]), w);
        }
        assert_eq!(log_mean_weight(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_mean_weight_partial_support() {
        // Two of four replicates inside the tolerance vs all four: the MH
        // ratio is (2/4)/(4/4) = 1/2.
        let num = log_mean_weight(&[0.0, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]);
        let den = log_mean_weight(&[0.0, 0.0, 0.0, 0.0]);
        assert!((mh_log_ratio(num, den) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mh_ratio_infinite_cases() {
        assert_eq!(mh_log_ratio(f64::NEG_INFINITY, 0.0), f64::NEG_INFINITY);
        assert_eq!(
            mh_log_ratio(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
        assert_eq!(mh_log_ratio(0.0, f64::NEG_INFINITY), f64::INFINITY);
    }

    #[test]
    fn mh_ratio_invariant_under_constant_rescaling() {
        // Multiplying prior or kernel by a positive constant shifts both log
        // targets identically and cancels in the ratio.
        let (lw_p, lp_p) = (-1.25, -0.5);
        let (lw_c, lp_c) = (-0.75, -2.0);
        let base = mh_log_ratio(lw_p + lp_p, lw_c + lp_c);
        for shift in [3.7f64.ln(), -2.0, 40.0] {
            let shifted = mh_log_ratio(lw_p + shift + lp_p, lw_c + shift + lp_c);
            assert!((base - shifted).abs() < 1e-12);
        }
    }

    #[test]
    fn metropolis_accept_certain_and_impossible() {
        let mut rng = RandomStream::new(1, 0);
        for _ in 0..64 {
            assert!(metropolis_accept(0.0, &mut rng));
            assert!(metropolis_accept(f64::INFINITY, &mut rng));
            assert!(!metropolis_accept(f64::NEG_INFINITY, &mut rng));
        }
    }

    #[test]
    fn stream_ids_are_disjoint() {
        let a = sim_stream_id(0, 1, 0);
        let b = sim_stream_id(0, 1, 1);
        let c = sim_stream_id(1, 1, 0);
        let d = init_stream_id(0, 1, 0);
        let ids = [a, b, c, d, 0, 1];
        for (i, x) in ids.iter().enumerate() {
            for y in &ids[i + 1..] {
                assert_ne!(x, y);
            }
        }
    }

    #[test]
    fn trace_bookkeeping() {
        let mut trace = ChainTrace::with_capacity(2, 0, 4, 9, 1, Some(3.0));
        trace.push(&[1.0, 2.0], 5.0, 0.7, true, Phase::BurnIn, None);
        trace.push(&[1.0, 2.0], 3.0, 0.7, false, Phase::Sampling, None);
        trace.push(&[0.5, 2.5], 3.0, 0.2, true, Phase::Sampling, None);
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.meta.n_accepted, 2);
        assert_eq!(trace.recount_accepted(), 2);
        assert_eq!(trace.theta_row(2), &[0.5, 2.5]);
        let ks: Vec<f64> = trace.component(0).collect();
        assert_eq!(ks, vec![1.0, 1.0, 0.5]);
        assert_eq!(trace.kept_indices(0, 1, PhaseFilter::Sampling), vec![1, 2]);
        assert_eq!(trace.kept_indices(0, 2, PhaseFilter::All), vec![1]);

        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,phase,accepted,epsilon,rho,theta_1,theta_2"
        );
        assert_eq!(lines.next().unwrap(), "1,burn_in,1,5,0.7,1,2");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn trace_with_tau_columns() {
        let mut trace = ChainTrace::with_capacity(1, 2, 1, 0, 0, None);
        trace.push(
            &[0.3],
            1.0,
            0.1,
            true,
            Phase::Sampling,
            Some(&[0.01, -0.02]),
        );
        assert_eq!(trace.tau_row(0).unwrap(), &[0.01, -0.02]);
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,phase,accepted,epsilon,rho,theta_1,tau_1,tau_2\n"));
    }
}
