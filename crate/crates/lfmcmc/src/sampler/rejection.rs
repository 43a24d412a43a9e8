//! Likelihood-free rejection sampling from the prior.

use rand::Rng;

use crate::kernel::{Kernel, WeightSpec};
use crate::model::{GenerativeModel, ParamVector, SummaryVector};
use crate::rng::RandomStream;
use crate::{Error, Result};

/// Output of [`rejection_sample`].
#[derive(Clone, Debug)]
pub struct RejectionResult {
    pub accepted: Vec<ParamVector>,
    /// Prior draws consumed (accepted or not).
    pub n_draws: usize,
    /// True when the draw budget ran out before `n_accept` acceptances.
    pub exhausted: bool,
}

impl RejectionResult {
    pub fn acceptance_rate(&self) -> f64 {
        if self.n_draws == 0 {
            0.0
        } else {
            self.accepted.len() as f64 / self.n_draws as f64
        }
    }
}

/// Draws parameters from the prior, simulates a dataset at each, and keeps
/// those whose summaries land close to the observed ones: the uniform
/// kernel keeps a draw iff `rho <= epsilon`, other kernels keep it with
/// probability `weight(rho) / weight(0)`.
///
/// Returns the first `n_accept` accepted parameters, or fewer when
/// `max_draws` is exhausted (flagged on the result and logged).
pub fn rejection_sample(
    model: &dyn GenerativeModel,
    spec: &WeightSpec,
    observed: &SummaryVector,
    n_accept: usize,
    max_draws: usize,
    rng: &mut RandomStream,
) -> Result<RejectionResult> {
    if !model.has_proper_prior() {
        return Err(Error::Config(
            "rejection sampling needs a proper prior to draw from".into(),
        ));
    }
    if observed.len() != model.summary_dim() || spec.metric().dim() != model.summary_dim() {
        return Err(Error::DimensionMismatch(
            "observed summary, metric and model must share one dimension".into(),
        ));
    }
    if n_accept == 0 || max_draws == 0 {
        return Err(Error::Config(
            "n_accept and max_draws must be positive".into(),
        ));
    }

    let mut accepted = Vec::with_capacity(n_accept);
    let mut n_draws = 0;
    while accepted.len() < n_accept && n_draws < max_draws {
        n_draws += 1;
        let theta = model.sample_prior(rng).expect("proper prior checked above");
        let summary = model.simulate_summary(&theta, rng);
        let rho = spec.metric().distance(&summary, observed);
        let keep = match spec.kernel() {
            Kernel::Uniform => spec.log_weight(rho) > f64::NEG_INFINITY,
            _ => {
                // log weight at zero distance is 0 for every kernel shape.
                let lw = spec.log_weight(rho);
                lw > f64::NEG_INFINITY && rng.random::<f64>() < lw.exp()
            }
        };
        if keep {
            accepted.push(theta);
        }
    }

    let exhausted = accepted.len() < n_accept;
    if exhausted {
        log::warn!(
            "rejection sampler exhausted {max_draws} draws with {}/{n_accept} acceptances",
            accepted.len()
        );
    }
    Ok(RejectionResult {
        accepted,
        n_draws,
        exhausted,
    })
}
