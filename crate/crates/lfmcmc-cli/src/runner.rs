//! Drives one configured experiment: n_chains chains with stream ids
//! 0..n_chains-1, one trace CSV per chain, and a tidy summary CSV with
//! acceptance rates, posterior moments, HPD intervals and KS accuracy
//! against the model's analytic reference where one exists.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use lfmcmc::diagnostics::{acceptance_rate, hpd_interval, ks_statistic, ReferenceDistribution};
use lfmcmc::kernel::{Kernel, WeightSpec};
use lfmcmc::model::ParamVector;
use lfmcmc::models::{exponential_true_posterior, SummarySelector, ToyPosterior};
use lfmcmc::rng::RandomStream;
use lfmcmc::sampler::{
    epsilon_augmented_run, error_augmented_run, rejection_sample, replicate_mcmc_run_with,
    ChainTrace, McmcOptions, PhaseFilter, RejectionResult,
};

use crate::config::{
    build, BuiltExperiment, ExperimentConfig, SamplerKind, PRIOR_PREDICTIVE_STREAM,
};
use crate::output::{buffered, write_trace};
use crate::{CliError, CliResult};

pub struct RunOutputs {
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

pub const SUMMARY_HEADER: &str = "experiment,chain,epsilon,s,kernel,metric,statistic,value";

/// Executes the configured sampler and writes its outputs; returns the
/// written paths.
pub fn run_experiment(config: &ExperimentConfig) -> CliResult<RunOutputs> {
    let built = build(config)?;
    let exp = &config.experiment;
    let out_dir = config.out_dir();
    std::fs::create_dir_all(&out_dir)?;

    let mut trace_paths = Vec::new();
    let mut rows: Vec<SummaryRow> = Vec::new();

    if built.kind == SamplerKind::Rejection {
        let results: Vec<CliResult<RejectionResult>> = (0..exp.n_chains as u64)
            .into_par_iter()
            .map(|chain| run_rejection(&built, config, chain))
            .collect();
        for (chain, result) in results.into_iter().enumerate() {
            let result = result?;
            let path = out_dir.join(format!("{}_chain{chain}_samples.csv", exp.id));
            write_rejection_samples(&path, &built, &result)?;
            trace_paths.push(path);
            rows.extend(rejection_summary(&built, config, chain, &result));
        }
    } else {
        let traces: Vec<CliResult<ChainTrace>> = (0..exp.n_chains as u64)
            .into_par_iter()
            .map(|chain| run_mcmc_chain(&built, config, chain))
            .collect();
        for (chain, trace) in traces.into_iter().enumerate() {
            let mut trace = trace?;
            trace.meta.config_digest = built.digest.clone();
            let path = write_trace(&out_dir, &format!("{}_chain{chain}", exp.id), &trace)?;
            trace_paths.push(path);
            rows.extend(chain_summary(&built, config, chain, &trace));
        }
    }

    let summary_path = out_dir.join(format!("{}_summary.csv", exp.id));
    write_summary(&summary_path, &rows)?;

    if let Some(cov) = &built.estimated_covariance {
        let path = out_dir.join(format!("{}_covariance.csv", exp.id));
        let mut w = buffered(&path)?;
        writeln!(w, "row_major")?;
        let flat: Vec<String> = cov.transpose().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", flat.join(","))?;
        w.flush()?;
    }

    Ok(RunOutputs {
        trace_paths,
        summary_path,
    })
}

/// Runs one MCMC chain of the built experiment on the given stream id.
pub fn run_mcmc_chain(
    built: &BuiltExperiment,
    config: &ExperimentConfig,
    chain: u64,
) -> CliResult<ChainTrace> {
    let exp = &config.experiment;
    let mut rng = RandomStream::new(exp.seed, chain);
    let theta0 = built
        .theta0
        .as_ref()
        .ok_or_else(|| CliError::Config("init.theta0 is required".into()))?;
    let proposal = built
        .proposal
        .as_ref()
        .ok_or_else(|| CliError::Config("proposal.scales is required".into()))?;

    let trace = match built.kind {
        SamplerKind::LfMcmc | SamplerKind::Replicate => {
            let schedule = built
                .schedule
                .as_ref()
                .ok_or_else(|| CliError::Config("[schedule] section is required".into()))?;
            let spec = WeightSpec::new(built.kernel, built.metric.clone(), schedule.target())?;
            let s = if built.kind == SamplerKind::LfMcmc {
                1
            } else {
                exp.s
            };
            replicate_mcmc_run_with(
                built.model.as_ref(),
                proposal,
                &spec,
                schedule,
                &built.observed,
                theta0,
                exp.n_iter,
                s,
                &McmcOptions { init: built.init },
                &mut rng,
            )?
        }
        SamplerKind::EpsilonAugmented => {
            let section = config
                .epsilon_augmented
                .as_ref()
                .ok_or_else(|| CliError::Config("missing [epsilon_augmented] section".into()))?;
            epsilon_augmented_run(
                built.model.as_ref(),
                proposal,
                built.kernel,
                &built.metric,
                section.prior_rate,
                section.proposal_scale,
                &built.observed,
                theta0,
                exp.n_iter,
                &mut rng,
            )?
        }
        SamplerKind::ErrorAugmented => {
            let error_config = built
                .error_config
                .as_ref()
                .ok_or_else(|| CliError::Config("missing [error_augmented] section".into()))?;
            error_augmented_run(
                built.model.as_ref(),
                proposal,
                error_config,
                &built.observed,
                theta0,
                exp.n_iter,
                &mut rng,
            )?
        }
        SamplerKind::Rejection => unreachable!("rejection handled by run_experiment"),
    };
    Ok(trace)
}

fn run_rejection(
    built: &BuiltExperiment,
    config: &ExperimentConfig,
    chain: u64,
) -> CliResult<RejectionResult> {
    let section = config
        .rejection
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [rejection] section".into()))?;
    let epsilon = built
        .epsilon
        .ok_or_else(|| CliError::Config("weight.epsilon is required".into()))?;
    let spec = WeightSpec::new(built.kernel, built.metric.clone(), epsilon)?;
    let mut rng = RandomStream::new(config.experiment.seed, chain);
    Ok(rejection_sample(
        built.model.as_ref(),
        &spec,
        &built.observed,
        section.n_accept,
        section.max_draws,
        &mut rng,
    )?)
}

struct SummaryRow {
    /// `experiment,chain,epsilon,s,kernel,metric` columns, pre-rendered.
    prefix: String,
    statistic: String,
    value: f64,
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> CliResult<()> {
    let mut w = buffered(path)?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.prefix, r.statistic, r.value)?;
    }
    w.flush()?;
    Ok(())
}

fn row_prefix(built: &BuiltExperiment, config: &ExperimentConfig, chain: usize) -> String {
    let eps = built
        .schedule
        .as_ref()
        .map(|s| s.target())
        .or(built.epsilon)
        .map(|e| e.to_string())
        .unwrap_or_else(|| "NaN".to_string());
    // Effective replicate count: the plain LF-MCMC and rejection samplers
    // always simulate once per step.
    let s = match built.kind {
        SamplerKind::Replicate | SamplerKind::ErrorAugmented => config.experiment.s,
        _ => 1,
    };
    format!(
        "{},{chain},{eps},{s},{},{}",
        config.experiment.id,
        built.kernel.name(),
        built.metric.kind().name()
    )
}

fn push_row(rows: &mut Vec<SummaryRow>, prefix: &str, statistic: &str, value: f64) {
    rows.push(SummaryRow {
        prefix: prefix.to_string(),
        statistic: statistic.to_string(),
        value,
    });
}

/// The analytic reference the model provides for this configuration, if any.
fn analytic_reference(
    built: &BuiltExperiment,
    config: &ExperimentConfig,
) -> Option<ReferenceDistribution> {
    let observed = built.observed.values();
    match config.model.name.as_str() {
        "exponential" => {
            let selector = config
                .model
                .params
                .statistic
                .as_deref()
                .map(|s| SummarySelector::parse(s).ok())
                .unwrap_or(Some(SummarySelector::Both))?;
            let canonical = match selector {
                SummarySelector::Both => observed == [4.0, 1.0],
                SummarySelector::Mean => observed == [4.0],
                SummarySelector::Sd => false,
            };
            canonical.then(exponential_true_posterior)
        }
        "normal_toy" => {
            let epsilon = built
                .schedule
                .as_ref()
                .map(|s| s.target())
                .or(built.epsilon)?;
            if !matches!(built.kernel, Kernel::Uniform | Kernel::Gaussian) {
                return None;
            }
            // The closed form takes the uniform-equivalent width; the
            // gaussian kernel's tolerance is its sd, a factor sqrt(3) less.
            let closed_form_eps = match built.kernel {
                Kernel::Gaussian => epsilon * 3.0f64.sqrt(),
                _ => epsilon,
            };
            let efficiency = config.model.params.efficiency.unwrap_or(1.0);
            ToyPosterior::new(built.kernel, closed_form_eps, efficiency)
                .ok()
                .map(|t| t.reference())
        }
        _ => None,
    }
}

fn chain_summary(
    built: &BuiltExperiment,
    config: &ExperimentConfig,
    chain: usize,
    trace: &ChainTrace,
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let prefix = row_prefix(built, config, chain);
    if trace.is_empty() {
        push_row(&mut rows, &prefix, "empty_trace", 1.0);
        return rows;
    }

    if let Ok(rate) = acceptance_rate(trace, PhaseFilter::All) {
        push_row(&mut rows, &prefix, "acceptance_rate", rate);
    }
    if let Ok(rate) = acceptance_rate(trace, PhaseFilter::Sampling) {
        push_row(&mut rows, &prefix, "acceptance_rate_sampling", rate);
    }

    let exp = &config.experiment;
    let names = built.model.param_names();
    for comp in 0..trace.param_dim() {
        let kept = trace.kept_component(comp, exp.burn_in, exp.thin, PhaseFilter::Sampling);
        let name = &names[comp];
        if kept.is_empty() {
            push_row(&mut rows, &prefix, &format!("empty_kept_{name}"), 1.0);
            continue;
        }
        let (mean, sd) = mean_sd(&kept);
        push_row(&mut rows, &prefix, &format!("post_mean_{name}"), mean);
        push_row(&mut rows, &prefix, &format!("post_sd_{name}"), sd);
        for mass in [0.5, 0.95] {
            if let Ok((lo, hi)) = hpd_interval(&kept, mass) {
                let tag = (mass * 100.0) as u32;
                push_row(&mut rows, &prefix, &format!("hpd{tag}_lo_{name}"), lo);
                push_row(&mut rows, &prefix, &format!("hpd{tag}_hi_{name}"), hi);
            }
        }
        if comp == 0 {
            if let Some(reference) = analytic_reference(built, config) {
                if let Ok(ks) = ks_statistic(&kept, &reference) {
                    push_row(&mut rows, &prefix, "ks_reference", ks);
                }
            }
        }
    }

    if trace.tau_dim() > 0 {
        for comp in 0..trace.tau_dim() {
            let kept: Vec<f64> = trace
                .kept_indices(exp.burn_in, exp.thin, PhaseFilter::Sampling)
                .into_iter()
                .map(|t| trace.tau_row(t).expect("tau trace")[comp])
                .collect();
            if kept.len() >= 20 {
                if let Ok((lo, hi)) = hpd_interval(&kept, 0.5) {
                    push_row(
                        &mut rows,
                        &prefix,
                        &format!("hpd50_lo_tau_{}", comp + 1),
                        lo,
                    );
                    push_row(
                        &mut rows,
                        &prefix,
                        &format!("hpd50_hi_tau_{}", comp + 1),
                        hi,
                    );
                }
            }
        }
    }

    rows
}

fn rejection_summary(
    built: &BuiltExperiment,
    config: &ExperimentConfig,
    chain: usize,
    result: &RejectionResult,
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let prefix = row_prefix(built, config, chain);
    push_row(
        &mut rows,
        &prefix,
        "acceptance_rate",
        result.acceptance_rate(),
    );
    push_row(&mut rows, &prefix, "n_draws", result.n_draws as f64);
    push_row(
        &mut rows,
        &prefix,
        "exhausted",
        result.exhausted as u8 as f64,
    );
    if result.accepted.is_empty() {
        push_row(&mut rows, &prefix, "empty_trace", 1.0);
        return rows;
    }
    let names = built.model.param_names();
    for comp in 0..built.model.param_dim() {
        let values: Vec<f64> = result.accepted.iter().map(|p| p.values()[comp]).collect();
        let (mean, sd) = mean_sd(&values);
        push_row(
            &mut rows,
            &prefix,
            &format!("post_mean_{}", names[comp]),
            mean,
        );
        push_row(&mut rows, &prefix, &format!("post_sd_{}", names[comp]), sd);
        if comp == 0 {
            if let Some(reference) = analytic_reference(built, config) {
                if let Ok(ks) = ks_statistic(&values, &reference) {
                    push_row(&mut rows, &prefix, "ks_reference", ks);
                }
            }
        }
    }
    rows
}

fn write_rejection_samples(
    path: &Path,
    built: &BuiltExperiment,
    result: &RejectionResult,
) -> CliResult<()> {
    let mut w = buffered(path)?;
    let names = built.model.param_names();
    let header: Vec<String> = (1..=names.len()).map(|i| format!("theta_{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in &result.accepted {
        let row: Vec<String> = p.values().iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Uniform box draws of the parameters with one simulated summary each,
/// written as a `(theta, T(x))` CSV.
pub fn prior_predictive(config: &ExperimentConfig) -> CliResult<PathBuf> {
    let built = build_for_prior_predictive(config)?;
    let section = config
        .prior_predictive
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [prior_predictive] section".into()))?;
    if section.ranges.is_empty() {
        return Err(CliError::Config("prior_predictive.ranges is empty".into()));
    }
    if section.ranges.len() != built.param_dim() {
        return Err(CliError::Config(format!(
            "prior_predictive.ranges has {} entries for a {}-parameter model",
            section.ranges.len(),
            built.param_dim()
        )));
    }
    for (i, [lo, hi]) in section.ranges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(CliError::Config(format!(
                "prior_predictive.ranges[{i}]: invalid range [{lo}, {hi}]"
            )));
        }
    }
    if section.n_draws == 0 {
        return Err(CliError::Config(
            "prior_predictive.n_draws must be positive".into(),
        ));
    }

    let out_dir = config.out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join(format!("{}_prior_predictive.csv", config.experiment.id));
    let mut w = buffered(&path)?;
    let names = built.param_names();
    let mut header: Vec<String> = names.iter().cloned().collect();
    header.extend((1..=built.summary_dim()).map(|i| format!("t_{i}")));
    writeln!(w, "{}", header.join(","))?;

    let mut rng = RandomStream::new(config.experiment.seed, PRIOR_PREDICTIVE_STREAM);
    for _ in 0..section.n_draws {
        let theta = draw_in_support(built.as_ref(), &section.ranges, &mut rng)?;
        let summary = built.simulate_summary(&theta, &mut rng);
        let mut row: Vec<String> = theta.values().iter().map(|v| v.to_string()).collect();
        row.extend(summary.values().iter().map(|v| v.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(path)
}

fn build_for_prior_predictive(
    config: &ExperimentConfig,
) -> CliResult<Box<dyn lfmcmc::model::GenerativeModel>> {
    // Prior-predictive runs need only the model; weight/schedule sections
    // may be absent.
    crate::config::build_model_only(config)
}

fn draw_in_support(
    model: &dyn lfmcmc::model::GenerativeModel,
    ranges: &[[f64; 2]],
    rng: &mut RandomStream,
) -> CliResult<ParamVector> {
    for _ in 0..1000 {
        let values: Vec<f64> = ranges
            .iter()
            .map(|[lo, hi]| lo + rng.random::<f64>() * (hi - lo))
            .collect();
        let theta = ParamVector::new(model.param_names(), values)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        if model.prior_log_density(&theta).is_finite() {
            return Ok(theta);
        }
    }
    Err(CliError::Runtime(
        "prior-predictive box lies outside the model support".into(),
    ))
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
