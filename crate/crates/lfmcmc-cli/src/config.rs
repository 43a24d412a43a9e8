//! Experiment configuration: flat TOML with sections, decimal literals only.
//!
//! Every run embeds a stable digest of its parsed configuration in the
//! output metadata, so results can be traced back to the exact settings
//! that produced them.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lfmcmc::distance::{estimate_covariance, DistanceMetric, MetricKind};
use lfmcmc::kernel::Kernel;
use lfmcmc::model::{
    gaussian_random_walk, GaussianRandomWalk, GenerativeModel, ParamVector, SummaryVector,
};
use lfmcmc::models::{ExponentialModel, GammaModel, NormalToy, SummarySelector};
use lfmcmc::rng::RandomStream;
use lfmcmc::sampler::{ErrorModelConfig, InitStrategy};
use lfmcmc::schedule::EpsilonSchedule;
use lfmcmc::Error;

use crate::{CliError, CliResult};

/// Stream id reserved for pilot covariance estimation; outside the chain
/// id range and the samplers' derived-stream space.
pub const PILOT_STREAM: u64 = 1 << 32;
/// Stream id reserved for prior-predictive draws.
pub const PRIOR_PREDICTIVE_STREAM: u64 = (1 << 32) + 1;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    #[serde(default)]
    pub weight: Option<WeightSection>,
    #[serde(default)]
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub proposal: Option<ProposalSection>,
    #[serde(default)]
    pub init: Option<InitSection>,
    #[serde(default)]
    pub rejection: Option<RejectionSection>,
    #[serde(default)]
    pub epsilon_augmented: Option<EpsilonAugmentedSection>,
    #[serde(default)]
    pub error_augmented: Option<ErrorAugmentedSection>,
    #[serde(default)]
    pub prior_predictive: Option<PriorPredictiveSection>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    pub sampler: String,
    pub seed: u64,
    #[serde(default = "default_one")]
    pub n_chains: usize,
    #[serde(default)]
    pub n_iter: usize,
    #[serde(default = "default_one")]
    pub s: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_one")]
    pub thin: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    /// Observed summary vector; defaults to the model's own observed value
    /// where one exists (normal_toy).
    #[serde(default)]
    pub observed: Option<Vec<f64>>,
    #[serde(default)]
    pub params: ModelParams,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Dataset size for the exponential and gamma models.
    #[serde(default)]
    pub n: Option<usize>,
    /// Summary selector for the exponential model: mean, sd or both.
    #[serde(default)]
    pub statistic: Option<String>,
    /// Relative efficiency of the normal-toy statistic.
    #[serde(default)]
    pub efficiency: Option<f64>,
    /// Flat prior interval of the normal toy.
    #[serde(default)]
    pub prior_interval: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub kernel: String,
    pub metric: String,
    /// Tolerance for samplers that take no schedule (rejection).
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Row-major R x R covariance; estimated from pilot simulations when
    /// absent and the metric needs one.
    #[serde(default)]
    pub covariance: Option<Vec<f64>>,
    #[serde(default)]
    pub pilot_theta: Option<Vec<f64>>,
    #[serde(default = "default_pilot_sims")]
    pub pilot_sims: usize,
}

fn default_pilot_sims() -> usize {
    1000
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub schedule: String,
    pub target_epsilon: f64,
    #[serde(default)]
    pub epsilon0: Option<f64>,
    #[serde(default)]
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSection {
    pub scales: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    1000
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RejectionSection {
    pub n_accept: usize,
    pub max_draws: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonAugmentedSection {
    pub prior_rate: f64,
    pub proposal_scale: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorAugmentedSection {
    pub tau_proposal_scale: f64,
    pub tau_prior_scales: Vec<f64>,
    #[serde(default)]
    pub bandwidth_floor: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PriorPredictiveSection {
    /// One [lo, hi] pair per parameter.
    pub ranges: Vec<[f64; 2]>,
    pub n_draws: usize,
}

/// Which sampler a config drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Rejection,
    LfMcmc,
    Replicate,
    EpsilonAugmented,
    ErrorAugmented,
}

impl SamplerKind {
    pub fn parse(name: &str) -> CliResult<Self> {
        match name {
            "rejection" => Ok(Self::Rejection),
            "lf_mcmc" => Ok(Self::LfMcmc),
            "replicate" => Ok(Self::Replicate),
            "epsilon_augmented" => Ok(Self::EpsilonAugmented),
            "error_augmented" => Ok(Self::ErrorAugmented),
            _ => Err(CliError::Config(format!(
                "experiment.sampler: unknown sampler {name:?} (expected rejection, lf_mcmc, \
                 replicate, epsilon_augmented, error_augmented)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rejection => "rejection",
            Self::LfMcmc => "lf_mcmc",
            Self::Replicate => "replicate",
            Self::EpsilonAugmented => "epsilon_augmented",
            Self::ErrorAugmented => "error_augmented",
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    /// Stable digest of the parsed configuration (first 16 hex characters of
    /// the SHA-256 of its canonical serialization).
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn sampler_kind(&self) -> CliResult<SamplerKind> {
        SamplerKind::parse(&self.experiment.sampler)
    }

    /// Output directory: config value, else `LFMCMC_OUT_DIR`, else `out`.
    pub fn out_dir(&self) -> PathBuf {
        self.experiment
            .out_dir
            .clone()
            .or_else(|| std::env::var("LFMCMC_OUT_DIR").ok())
            .unwrap_or_else(|| "out".to_string())
            .into()
    }
}

/// Everything resolved and validated, ready to run.
pub struct BuiltExperiment {
    pub kind: SamplerKind,
    pub model: Box<dyn GenerativeModel>,
    pub observed: SummaryVector,
    pub kernel: Kernel,
    pub metric: DistanceMetric,
    /// Tolerance for schedule-free samplers (rejection).
    pub epsilon: Option<f64>,
    pub schedule: Option<EpsilonSchedule>,
    pub proposal: Option<GaussianRandomWalk>,
    pub theta0: Option<ParamVector>,
    pub init: InitStrategy,
    pub error_config: Option<ErrorModelConfig>,
    pub digest: String,
    /// Covariance estimated from pilot simulations, for the run metadata.
    pub estimated_covariance: Option<DMatrix<f64>>,
}

pub fn build(config: &ExperimentConfig) -> CliResult<BuiltExperiment> {
    let kind = config.sampler_kind()?;
    let model = build_model(&config.model)?;
    let observed = resolve_observed(&config.model, model.as_ref())?;

    let needs_weight = matches!(
        kind,
        SamplerKind::Rejection
            | SamplerKind::LfMcmc
            | SamplerKind::Replicate
            | SamplerKind::EpsilonAugmented
    );
    let (kernel, metric, epsilon, estimated_covariance) = if needs_weight {
        let weight = config
            .weight
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [weight] section".into()))?;
        let kernel = Kernel::parse(&weight.kernel).map_err(CliError::from)?;
        let (metric, estimated) = build_metric(weight, model.as_ref(), config.experiment.seed)?;
        (kernel, metric, weight.epsilon, estimated)
    } else {
        // The error-augmented sampler takes no weight spec; keep a Euclidean
        // metric around for reporting distances.
        let metric = DistanceMetric::euclidean(model.summary_dim()).map_err(CliError::from)?;
        (Kernel::Biweight, metric, None, None)
    };

    let schedule = match (&config.schedule, kind) {
        (Some(s), SamplerKind::LfMcmc | SamplerKind::Replicate) => Some(build_schedule(s)?),
        (None, SamplerKind::LfMcmc | SamplerKind::Replicate) => {
            return Err(CliError::Config(
                "missing [schedule] section for an MCMC sampler".into(),
            ))
        }
        _ => None,
    };

    let proposal = match &config.proposal {
        Some(p) => Some(gaussian_random_walk(p.scales.clone()).map_err(CliError::from)?),
        None => None,
    };
    if proposal.is_none() && kind != SamplerKind::Rejection {
        return Err(CliError::Config(
            "missing [proposal] section (proposal.scales)".into(),
        ));
    }
    if let Some(p) = &proposal {
        if p.scales().len() != model.param_dim() {
            return Err(CliError::Config(format!(
                "proposal.scales has {} entries for a {}-parameter model",
                p.scales().len(),
                model.param_dim()
            )));
        }
    }

    let theta0 = match &config.init {
        Some(init) => Some(
            ParamVector::new(model.param_names(), init.theta0.clone())
                .map_err(|e| CliError::Config(format!("init.theta0: {e}")))?,
        ),
        None => None,
    };
    if theta0.is_none() && kind != SamplerKind::Rejection {
        return Err(CliError::Config(
            "missing [init] section (init.theta0)".into(),
        ));
    }

    let init = match &config.init {
        Some(section) => match section.strategy.as_deref() {
            None | Some("simulate_retry") => InitStrategy::SimulateRetry {
                budget: section.budget,
            },
            Some("prior_retry") => InitStrategy::PriorRetry {
                budget: section.budget,
            },
            Some(other) => {
                return Err(CliError::Config(format!(
                "init.strategy: unknown strategy {other:?} (expected simulate_retry, prior_retry)"
            )))
            }
        },
        None => InitStrategy::default(),
    };

    let error_config = if kind == SamplerKind::ErrorAugmented {
        let section = config
            .error_augmented
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [error_augmented] section".into()))?;
        let mut cfg = ErrorModelConfig::new(
            section.tau_proposal_scale,
            section.tau_prior_scales.clone(),
            config.experiment.s,
        )
        .map_err(CliError::from)?;
        if let Some(floor) = section.bandwidth_floor {
            cfg.bandwidth_floor = floor;
        }
        Some(cfg)
    } else {
        None
    };

    match kind {
        SamplerKind::Rejection => {
            if config.rejection.is_none() {
                return Err(CliError::Config("missing [rejection] section".into()));
            }
            if epsilon.is_none() {
                return Err(CliError::Config(
                    "weight.epsilon is required for the rejection sampler".into(),
                ));
            }
        }
        SamplerKind::EpsilonAugmented if config.epsilon_augmented.is_none() => {
            return Err(CliError::Config(
                "missing [epsilon_augmented] section".into(),
            ));
        }
        _ => {}
    }

    Ok(BuiltExperiment {
        kind,
        model,
        observed,
        kernel,
        metric,
        epsilon,
        schedule,
        proposal,
        theta0,
        init,
        error_config,
        digest: config.digest(),
        estimated_covariance,
    })
}

/// Builds just the model from a config, for commands that need nothing else.
pub fn build_model_only(config: &ExperimentConfig) -> CliResult<Box<dyn GenerativeModel>> {
    build_model(&config.model)
}

fn build_model(section: &ModelSection) -> CliResult<Box<dyn GenerativeModel>> {
    let p = &section.params;
    match section.name.as_str() {
        "normal_toy" => {
            let mut toy = NormalToy::new();
            if let Some(e) = p.efficiency {
                toy = toy
                    .with_efficiency(e)
                    .map_err(|e| CliError::Config(format!("model.params.efficiency: {e}")))?;
            }
            if let Some([lo, hi]) = p.prior_interval {
                toy = toy
                    .with_prior_interval(lo, hi)
                    .map_err(|e| CliError::Config(format!("model.params.prior_interval: {e}")))?;
            }
            if p.n.is_some() || p.statistic.is_some() {
                return Err(CliError::Config(
                    "model.params.n / statistic do not apply to normal_toy".into(),
                ));
            }
            Ok(Box::new(toy))
        }
        "exponential" => {
            let selector = match &p.statistic {
                Some(s) => SummarySelector::parse(s)
                    .map_err(|e| CliError::Config(format!("model.params.statistic: {e}")))?,
                None => SummarySelector::Both,
            };
            let model = ExponentialModel::new(p.n.unwrap_or(20), selector)
                .map_err(|e| CliError::Config(format!("model.params.n: {e}")))?;
            Ok(Box::new(model))
        }
        "gamma" => {
            let model = GammaModel::new(p.n.unwrap_or(20))
                .map_err(|e| CliError::Config(format!("model.params.n: {e}")))?;
            Ok(Box::new(model))
        }
        other => Err(CliError::Config(format!(
            "model.name: unknown model {other:?} (expected normal_toy, exponential, gamma)"
        ))),
    }
}

fn resolve_observed(
    section: &ModelSection,
    model: &dyn GenerativeModel,
) -> CliResult<SummaryVector> {
    match &section.observed {
        Some(values) => {
            if values.len() != model.summary_dim() {
                return Err(CliError::Config(format!(
                    "model.observed has {} entries, the model produces {} summaries",
                    values.len(),
                    model.summary_dim()
                )));
            }
            SummaryVector::new(values.clone())
                .map_err(|e| CliError::Config(format!("model.observed: {e}")))
        }
        None if section.name == "normal_toy" => Ok(SummaryVector::new(vec![0.0]).expect("finite")),
        None => Err(CliError::Config(
            "model.observed is required for this model".into(),
        )),
    }
}

fn build_schedule(section: &ScheduleSection) -> CliResult<EpsilonSchedule> {
    let fail = |key: &str, e: Error| CliError::Config(format!("schedule.{key}: {e}"));
    match section.schedule.as_str() {
        "fixed" => {
            EpsilonSchedule::fixed(section.target_epsilon).map_err(|e| fail("target_epsilon", e))
        }
        "linear" => {
            let epsilon0 = section.epsilon0.ok_or_else(|| {
                CliError::Config("schedule.epsilon0 is required for the linear schedule".into())
            })?;
            let rate = section.rate.ok_or_else(|| {
                CliError::Config("schedule.rate is required for the linear schedule".into())
            })?;
            EpsilonSchedule::linear(section.target_epsilon, epsilon0, rate)
                .map_err(|e| fail("target_epsilon/epsilon0/rate", e))
        }
        "self_scaling" => EpsilonSchedule::self_scaling(section.target_epsilon)
            .map_err(|e| fail("target_epsilon", e)),
        other => Err(CliError::Config(format!(
            "schedule.schedule: unknown schedule {other:?} (expected fixed, linear, self_scaling)"
        ))),
    }
}

fn build_metric(
    weight: &WeightSection,
    model: &dyn GenerativeModel,
    seed: u64,
) -> CliResult<(DistanceMetric, Option<DMatrix<f64>>)> {
    let kind = MetricKind::parse(&weight.metric).map_err(CliError::from)?;
    let dim = model.summary_dim();
    if kind == MetricKind::Euclidean {
        return Ok((
            DistanceMetric::euclidean(dim).map_err(CliError::from)?,
            None,
        ));
    }

    if let Some(values) = &weight.covariance {
        if values.len() != dim * dim {
            return Err(CliError::Config(format!(
                "weight.covariance has {} entries, expected {} for a {dim}x{dim} matrix",
                values.len(),
                dim * dim
            )));
        }
        let cov = DMatrix::from_row_slice(dim, dim, values);
        let metric = DistanceMetric::from_kind(kind, dim, Some(cov))
            .map_err(|e| CliError::Config(format!("weight.covariance: {e}")))?;
        return Ok((metric, None));
    }

    // Pilot estimation, one shared estimate per experiment.
    let pilot_values = weight.pilot_theta.clone().ok_or_else(|| {
        CliError::Config(
            "weight.pilot_theta is required to estimate the covariance (or pass weight.covariance)"
                .into(),
        )
    })?;
    let pilot = ParamVector::new(model.param_names(), pilot_values)
        .map_err(|e| CliError::Config(format!("weight.pilot_theta: {e}")))?;
    let mut rng = RandomStream::new(seed, PILOT_STREAM);
    let estimate = estimate_covariance(model, &pilot, weight.pilot_sims, &mut rng);
    let cov = match estimate {
        Ok(cov) => cov,
        // The instructed fallback: scaled Euclidean only needs the diagonal.
        Err(Error::SingularCovariance { covariance, .. })
            if kind == MetricKind::ScaledEuclidean =>
        {
            *covariance
        }
        Err(e) => return Err(e.into()),
    };
    let metric = DistanceMetric::from_kind(kind, dim, Some(cov.clone())).map_err(CliError::from)?;
    Ok((metric, Some(cov)))
}

/// Shared parameter-name helper for configs that need labelled vectors.
pub fn named_vector(names: Arc<[String]>, values: Vec<f64>, key: &str) -> CliResult<ParamVector> {
    ParamVector::new(names, values).map_err(|e| CliError::Config(format!("{key}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
id = "t"
sampler = "lf_mcmc"
seed = 1
n_iter = 10

[model]
name = "exponential"
observed = [4.0, 1.0]

[weight]
kernel = "uniform"
metric = "euclidean"

[schedule]
schedule = "fixed"
target_epsilon = 2.0

[proposal]
scales = [1.0]

[init]
theta0 = [0.25]
"#;

    #[test]
    fn minimal_config_builds() {
        let config = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let built = build(&config).unwrap();
        assert_eq!(built.kind, SamplerKind::LfMcmc);
        assert_eq!(built.model.summary_dim(), 2);
        assert!(built.schedule.is_some());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let b = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = ExperimentConfig::from_toml(&MINIMAL.replace("seed = 1", "seed = 2")).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn unknown_keys_are_named() {
        let bad = MINIMAL.replace("scales = [1.0]", "scales = [1.0]\nbogus_key = 3");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_sampler_is_config_error() {
        let bad = MINIMAL.replace("lf_mcmc", "smc");
        let config = ExperimentConfig::from_toml(&bad).unwrap();
        let err = build(&config).err().expect("build should fail");
        assert!(err.to_string().contains("smc"), "{err}");
    }

    #[test]
    fn missing_schedule_is_config_error() {
        let bad = MINIMAL.replace("[schedule]", "[schedule_ignored]");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn explicit_covariance_must_fit() {
        let bad = MINIMAL.replace(
            "metric = \"euclidean\"",
            "metric = \"mahalanobis\"\ncovariance = [1.0, 0.0, 0.0]",
        );
        let config = ExperimentConfig::from_toml(&bad).unwrap();
        let err = build(&config).err().expect("build should fail");
        assert!(err.to_string().contains("covariance"), "{err}");
    }

    #[test]
    fn pilot_covariance_estimated_when_absent() {
        let cfg = MINIMAL.replace(
            "metric = \"euclidean\"",
            "metric = \"mahalanobis\"\npilot_theta = [0.25]",
        );
        let config = ExperimentConfig::from_toml(&cfg).unwrap();
        let built = build(&config).unwrap();
        let cov = built.estimated_covariance.expect("estimated");
        assert!((cov[(0, 0)] - 0.8).abs() < 0.2);
    }
}
