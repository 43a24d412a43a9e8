//! Built-in experiment suites reproducing the figure datasets.
//!
//! Each suite is exposed twice: a `figN_data` function returning the raw
//! results (used by the acceptance tests) and the [`figure_suite`] entry
//! point that writes them out as tidy CSVs in the diagnostics schema. All
//! suites are deterministic in `(seed, scale)`; `scale` multiplies
//! iteration counts so desk-scale runs stay cheap.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use lfmcmc::diagnostics::{
    acceptance_rate, hpd_interval, ks_statistic, sojourn_lengths, ReferenceDistribution,
};
use lfmcmc::distance::{estimate_covariance, DistanceMetric, MetricKind};
use lfmcmc::kernel::{Kernel, WeightSpec};
use lfmcmc::model::{gaussian_random_walk, GenerativeModel, ParamVector, SummaryVector};
use lfmcmc::models::{
    exponential_sd_limit_reference, exponential_true_posterior, ExponentialModel, GammaModel,
    SummarySelector,
};
use lfmcmc::rng::RandomStream;
use lfmcmc::sampler::{
    error_augmented_run, replicate_mcmc_run_with, ChainTrace, ErrorModelConfig, InitStrategy,
    McmcOptions, PhaseFilter,
};
use lfmcmc::schedule::EpsilonSchedule;

use crate::output::{buffered, write_diag_csv, write_trace, DiagRow};
use crate::{CliError, CliResult};

const REPLICATIONS: usize = 25;
const FIG_PILOT_STREAM: u64 = (1 << 33) + 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl FigureId {
    pub fn parse(name: &str) -> CliResult<Self> {
        match name {
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            "fig5" => Ok(Self::Fig5),
            "fig6" => Ok(Self::Fig6),
            _ => Err(CliError::Config(format!(
                "unknown figure id {name:?} (expected fig2..fig6)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Fig6 => "fig6",
        }
    }
}

/// Runs one figure suite and writes its CSVs under `out_dir`.
pub fn figure_suite(
    id: FigureId,
    seed: u64,
    scale: f64,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(CliError::Config(format!(
            "scale must be positive, got {scale}"
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    match id {
        FigureId::Fig2 => emit_fig2(seed, scale, out_dir),
        FigureId::Fig3 => emit_fig3(seed, scale, out_dir),
        FigureId::Fig4 => emit_fig4(seed, scale, out_dir),
        FigureId::Fig5 => emit_fig5(seed, scale, out_dir),
        FigureId::Fig6 => emit_fig6(seed, scale, out_dir),
    }
}

fn scaled(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(1)
}

fn exponential_pilot_covariance(
    model: &ExponentialModel,
    pilot: &ParamVector,
    seed: u64,
) -> CliResult<nalgebra::DMatrix<f64>> {
    let mut rng = RandomStream::new(seed, FIG_PILOT_STREAM);
    Ok(estimate_covariance(model, pilot, 1000, &mut rng)?)
}

/// Empirical pilot distances rho(T(x), T(y)) at a pilot parameter.
fn pilot_distances(
    model: &dyn GenerativeModel,
    pilot: &ParamVector,
    metric: &DistanceMetric,
    observed: &SummaryVector,
    n: usize,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let mut rng = RandomStream::new(seed, stream);
    let mut rhos: Vec<f64> = (0..n)
        .map(|_| metric.distance(&model.simulate_summary(pilot, &mut rng), observed))
        .collect();
    rhos.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    rhos
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn standard_error(values: &[f64]) -> f64 {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0);
    (var / values.len() as f64).sqrt()
}

fn median_usize(values: &[usize]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

// ---------------------------------------------------------------------------
// fig2: self-scaling burn-in and the effect of the target tolerance
// ---------------------------------------------------------------------------

pub struct Fig2Data {
    /// Four chains at target 3 with the self-scaling schedule.
    pub chains: Vec<ChainTrace>,
    /// One (target, trace) run per target 4.5, 4, 3.5, 3.
    pub rate_runs: Vec<(f64, ChainTrace)>,
}

pub fn fig2_data(seed: u64, scale: f64) -> CliResult<Fig2Data> {
    let model = ExponentialModel::default();
    let observed = SummaryVector::new(vec![4.0, 1.0])?;
    let pilot = ParamVector::new(model.param_names(), vec![0.25]).expect("valid pilot");
    let cov = exponential_pilot_covariance(&model, &pilot, seed)?;
    let metric = DistanceMetric::mahalanobis(cov)?;
    let proposal = gaussian_random_walk(vec![1.0])?;
    let theta0 = ParamVector::new(model.param_names(), vec![10.0]).expect("valid start");

    let run = |target: f64, n_iter: usize, stream: u64| -> CliResult<ChainTrace> {
        let schedule = EpsilonSchedule::self_scaling(target)?;
        let spec = WeightSpec::new(Kernel::Uniform, metric.clone(), target)?;
        let mut rng = RandomStream::new(seed, stream);
        Ok(replicate_mcmc_run_with(
            &model,
            &proposal,
            &spec,
            &schedule,
            &observed,
            &theta0,
            n_iter,
            1,
            &McmcOptions::default(),
            &mut rng,
        )?)
    };

    let n_chain_iter = scaled(20_000, scale);
    let chains: Vec<ChainTrace> = (0..4u64)
        .into_par_iter()
        .map(|c| run(3.0, n_chain_iter, c))
        .collect::<CliResult<_>>()?;

    let n_rate_iter = scaled(110_000, scale);
    let targets = [4.5, 4.0, 3.5, 3.0];
    let rate_runs: Vec<(f64, ChainTrace)> = targets
        .into_par_iter()
        .enumerate()
        .map(|(i, target)| Ok((target, run(target, n_rate_iter, 16 + i as u64)?)))
        .collect::<CliResult<_>>()?;

    Ok(Fig2Data { chains, rate_runs })
}

fn emit_fig2(seed: u64, scale: f64, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let data = fig2_data(seed, scale)?;
    let mut paths = Vec::new();

    let traces_path = out_dir.join("fig2_traces.csv");
    let mut w = buffered(&traces_path)?;
    writeln!(w, "chain,t,lambda,epsilon,phase,accepted")?;
    for (c, trace) in data.chains.iter().enumerate() {
        for t in 0..trace.len() {
            writeln!(
                w,
                "{c},{},{},{},{},{}",
                t + 1,
                trace.theta_row(t)[0],
                trace.epsilons()[t],
                trace.phases()[t].name(),
                trace.accepted_flags()[t] as u8
            )?;
        }
    }
    w.flush()?;
    paths.push(traces_path);

    let mut rows = Vec::new();
    let posterior_path = out_dir.join("fig2_posterior.csv");
    let mut w = buffered(&posterior_path)?;
    writeln!(w, "target_epsilon,lambda")?;
    for (target, trace) in &data.rate_runs {
        let rate = acceptance_rate(trace, PhaseFilter::Sampling)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        rows.push(DiagRow {
            experiment: "fig2c".into(),
            epsilon: *target,
            s: 1,
            kernel: Kernel::Uniform.name().into(),
            metric: MetricKind::Mahalanobis.name().into(),
            statistic: "acceptance_rate_sampling".into(),
            value: rate,
        });
        for lambda in trace.kept_component(0, 0, 10, PhaseFilter::Sampling) {
            writeln!(w, "{target},{lambda}")?;
        }
    }
    w.flush()?;
    paths.push(posterior_path);

    let rates_path = out_dir.join("fig2_rates.csv");
    write_diag_csv(&rates_path, &rows)?;
    paths.push(rates_path);
    Ok(paths)
}

// ---------------------------------------------------------------------------
// fig3: kernel and distance-metric comparison at matched overheads
// ---------------------------------------------------------------------------

pub struct Fig3Cell {
    pub panel: &'static str,
    pub kernel: Kernel,
    pub metric_kind: MetricKind,
    pub epsilon: f64,
    /// One KS statistic vs Gamma(21,80) per replicate.
    pub ks: Vec<f64>,
    /// One mean acceptance rate per replicate.
    pub acceptance: Vec<f64>,
}

/// Shared replication protocol: 1000 kept states at thin 1000 after a
/// 10,000-iteration burn-in, 25 replicates per cell.
struct ReplicationProtocol {
    burn_in: usize,
    thin: usize,
    kept: usize,
}

impl ReplicationProtocol {
    fn new(scale: f64) -> Self {
        Self {
            burn_in: scaled(10_000, scale),
            thin: scaled(1000, scale),
            kept: 1000,
        }
    }

    fn n_iter(&self) -> usize {
        self.burn_in + self.kept * self.thin
    }
}

#[allow(clippy::too_many_arguments)]
fn replicated_cell(
    model: &ExponentialModel,
    observed: &SummaryVector,
    metric: &DistanceMetric,
    kernel: Kernel,
    epsilon: f64,
    theta0: &ParamVector,
    protocol: &ReplicationProtocol,
    references: &[&ReferenceDistribution],
    seed: u64,
    stream_base: u64,
) -> CliResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let proposal = gaussian_random_walk(vec![1.0])?;
    let schedule = EpsilonSchedule::fixed(epsilon)?;
    let spec = WeightSpec::new(kernel, metric.clone(), epsilon)?;
    let results: Vec<CliResult<(Vec<f64>, f64)>> = (0..REPLICATIONS as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RandomStream::new(seed, stream_base + rep);
            let trace = replicate_mcmc_run_with(
                model,
                &proposal,
                &spec,
                &schedule,
                observed,
                theta0,
                protocol.n_iter(),
                1,
                &McmcOptions {
                    init: InitStrategy::SimulateRetry { budget: 100_000 },
                },
                &mut rng,
            )?;
            let kept = trace.kept_component(0, protocol.burn_in, protocol.thin, PhaseFilter::All);
            let ks: Vec<f64> = references
                .iter()
                .map(|reference| ks_statistic(&kept, reference))
                .collect::<Result<_, _>>()?;
            let rate = acceptance_rate(&trace, PhaseFilter::All)?;
            Ok((ks, rate))
        })
        .collect();

    let mut ks = vec![Vec::with_capacity(REPLICATIONS); references.len()];
    let mut acceptance = Vec::with_capacity(REPLICATIONS);
    for r in results {
        let (k, a) = r?;
        for (dst, v) in ks.iter_mut().zip(k) {
            dst.push(v);
        }
        acceptance.push(a);
    }
    Ok((ks, acceptance))
}

/// Mean acceptance rates at which panel (b) compares the distance metrics;
/// each metric's tolerance is calibrated to hit these, so the comparison is
/// at matched computational overheads.
pub const FIG3_TARGET_RATES: [f64; 4] = [0.012, 0.03, 0.07, 0.14];

/// Short-run mean acceptance rate of the LF-MCMC chain at one tolerance.
#[allow(clippy::too_many_arguments)]
fn short_run_rate(
    model: &ExponentialModel,
    observed: &SummaryVector,
    metric: &DistanceMetric,
    theta0: &ParamVector,
    epsilon: f64,
    seed: u64,
    stream: u64,
) -> CliResult<f64> {
    let proposal = gaussian_random_walk(vec![1.0])?;
    let spec = WeightSpec::new(Kernel::Uniform, metric.clone(), epsilon)?;
    let schedule = EpsilonSchedule::self_scaling(epsilon)?;
    let mut rng = RandomStream::new(seed, stream);
    let trace = replicate_mcmc_run_with(
        model,
        &proposal,
        &spec,
        &schedule,
        observed,
        theta0,
        50_000,
        1,
        &McmcOptions::default(),
        &mut rng,
    )?;
    Ok(acceptance_rate(&trace, PhaseFilter::Sampling)?)
}

/// Bisects the tolerance (on a log scale) until the chain's mean acceptance
/// rate hits `target_rate`.
#[allow(clippy::too_many_arguments)]
fn calibrate_epsilon(
    model: &ExponentialModel,
    observed: &SummaryVector,
    metric: &DistanceMetric,
    theta0: &ParamVector,
    rho_pilot_sorted: &[f64],
    target_rate: f64,
    seed: u64,
    stream_base: u64,
) -> CliResult<f64> {
    let mut lo = quantile_sorted(rho_pilot_sorted, 0.001).max(1e-8);
    let mut hi = quantile_sorted(rho_pilot_sorted, 0.9995);
    for round in 0..9 {
        let mid = ((lo.ln() + hi.ln()) / 2.0).exp();
        let rate = short_run_rate(
            model,
            observed,
            metric,
            theta0,
            mid,
            seed,
            stream_base + round,
        )?;
        if rate < target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

pub fn fig3_data(seed: u64, scale: f64) -> CliResult<Vec<Fig3Cell>> {
    let model = ExponentialModel::default();
    let observed = SummaryVector::new(vec![4.0, 1.0])?;
    let pilot = ParamVector::new(model.param_names(), vec![0.25]).expect("valid pilot");
    let cov = exponential_pilot_covariance(&model, &pilot, seed)?;
    let mahalanobis = DistanceMetric::mahalanobis(cov.clone())?;
    let scaled_euclidean = DistanceMetric::scaled_euclidean(cov)?;
    let euclidean = DistanceMetric::euclidean(2)?;

    let theta0 = ParamVector::new(model.param_names(), vec![0.25]).expect("valid start");
    let protocol = ReplicationProtocol::new(scale);
    let reference = exponential_true_posterior();
    let maha_eps = vec![3.0, 3.5, 4.0, 4.5];

    struct CellPlan {
        panel: &'static str,
        kernel: Kernel,
        metric_kind: MetricKind,
        epsilon: f64,
    }
    let mut plans = Vec::new();
    for kernel in [Kernel::Uniform, Kernel::Epanechnikov, Kernel::Triangle] {
        for &epsilon in &maha_eps {
            plans.push(CellPlan {
                panel: "fig3a",
                kernel,
                metric_kind: MetricKind::Mahalanobis,
                epsilon,
            });
        }
    }

    // Panel (b): calibrate every metric's tolerance grid to the same mean
    // acceptance rates, in parallel over (metric, rate) pairs.
    let metrics = [
        (MetricKind::Mahalanobis, &mahalanobis),
        (MetricKind::ScaledEuclidean, &scaled_euclidean),
        (MetricKind::Euclidean, &euclidean),
    ];
    let mut calibration_jobs = Vec::new();
    for (mi, (kind, metric)) in metrics.iter().enumerate() {
        let rho = pilot_distances(
            &model,
            &pilot,
            metric,
            &observed,
            4000,
            seed,
            FIG_PILOT_STREAM + 1,
        );
        for (ti, target) in FIG3_TARGET_RATES.iter().enumerate() {
            calibration_jobs.push((*kind, (*metric).clone(), rho.clone(), *target, mi, ti));
        }
    }
    let calibrated: Vec<CliResult<(MetricKind, f64)>> = calibration_jobs
        .par_iter()
        .map(|(kind, metric, rho, target, mi, ti)| {
            let stream_base = (1 << 22) + ((mi * 8 + ti) * 16) as u64;
            let epsilon = calibrate_epsilon(
                &model,
                &observed,
                metric,
                &theta0,
                rho,
                *target,
                seed,
                stream_base,
            )?;
            Ok((*kind, epsilon))
        })
        .collect();
    for result in calibrated {
        let (metric_kind, epsilon) = result?;
        plans.push(CellPlan {
            panel: "fig3b",
            kernel: Kernel::Uniform,
            metric_kind,
            epsilon,
        });
    }

    let mut cells = Vec::with_capacity(plans.len());
    for (idx, plan) in plans.iter().enumerate() {
        let metric = match plan.metric_kind {
            MetricKind::Mahalanobis => &mahalanobis,
            MetricKind::ScaledEuclidean => &scaled_euclidean,
            MetricKind::Euclidean => &euclidean,
        };
        let (mut ks, acceptance) = replicated_cell(
            &model,
            &observed,
            metric,
            plan.kernel,
            plan.epsilon,
            &theta0,
            &protocol,
            &[&reference],
            seed,
            (idx * REPLICATIONS) as u64,
        )?;
        cells.push(Fig3Cell {
            panel: plan.panel,
            kernel: plan.kernel,
            metric_kind: plan.metric_kind,
            epsilon: plan.epsilon,
            ks: ks.remove(0),
            acceptance,
        });
    }
    Ok(cells)
}

fn emit_fig3(seed: u64, scale: f64, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let cells = fig3_data(seed, scale)?;
    let mut rows = Vec::new();
    for cell in &cells {
        let base = |statistic: &str, value: f64| DiagRow {
            experiment: cell.panel.into(),
            epsilon: cell.epsilon,
            s: 1,
            kernel: cell.kernel.name().into(),
            metric: cell.metric_kind.name().into(),
            statistic: statistic.into(),
            value,
        };
        for (ks, rate) in cell.ks.iter().zip(&cell.acceptance) {
            rows.push(base("ks", *ks));
            rows.push(base("acceptance_rate", *rate));
        }
        rows.push(base("ks_mean", mean(&cell.ks)));
        rows.push(base("ks_se", standard_error(&cell.ks)));
        rows.push(base("acceptance_rate_mean", mean(&cell.acceptance)));
    }
    let path = out_dir.join("fig3.csv");
    write_diag_csv(&path, &rows)?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// fig4: summary-statistic subsets
// ---------------------------------------------------------------------------

pub struct Fig4Cell {
    pub selector: SummarySelector,
    pub epsilon: f64,
    /// KS vs the true Gamma(21,80) posterior, one per replicate.
    pub ks_true: Vec<f64>,
    /// KS vs Gamma(21,20), the sd-only limit (sd panel only).
    pub ks_sd_limit: Vec<f64>,
    pub acceptance: Vec<f64>,
}

pub fn fig4_data(seed: u64, scale: f64) -> CliResult<Vec<Fig4Cell>> {
    let observed_full = [4.0, 1.0];
    // Pilot points consistent with each statistic's own matching region:
    // the MLE 1/ybar for the mean, 1/s_y for the sd.
    let plans = [
        (SummarySelector::Mean, 0.25, vec![0.2, 0.5, 0.8, 0.95]),
        (SummarySelector::Sd, 1.0, vec![0.2, 0.5, 0.8, 0.95]),
        (SummarySelector::Both, 0.25, vec![0.5, 0.8, 0.95, 0.99]),
    ];
    let reference_true = exponential_true_posterior();
    let reference_sd = exponential_sd_limit_reference();
    let protocol = ReplicationProtocol::new(scale);

    let mut cells = Vec::new();
    let mut stream_base = 0u64;
    for (plan_idx, (selector, pilot_lambda, quantiles)) in plans.iter().enumerate() {
        let model = ExponentialModel::new(20, *selector).map_err(CliError::from)?;
        let observed = SummaryVector::new(selector.select(observed_full[0], observed_full[1]))?;
        let pilot =
            ParamVector::new(model.param_names(), vec![*pilot_lambda]).expect("valid pilot");
        let mut rng = RandomStream::new(seed, FIG_PILOT_STREAM + 10 + plan_idx as u64);
        let cov = estimate_covariance(&model, &pilot, 1000, &mut rng)?;
        let metric = DistanceMetric::mahalanobis(cov)?;
        let rhos = pilot_distances(
            &model,
            &pilot,
            &metric,
            &observed,
            4000,
            seed,
            FIG_PILOT_STREAM + 20 + plan_idx as u64,
        );
        let theta0 =
            ParamVector::new(model.param_names(), vec![*pilot_lambda]).expect("valid start");

        for q in quantiles {
            let epsilon = quantile_sorted(&rhos, *q);
            let references: Vec<&ReferenceDistribution> = if *selector == SummarySelector::Sd {
                vec![&reference_true, &reference_sd]
            } else {
                vec![&reference_true]
            };
            let (mut ks, acceptance) = replicated_cell(
                &model,
                &observed,
                &metric,
                Kernel::Uniform,
                epsilon,
                &theta0,
                &protocol,
                &references,
                seed,
                stream_base,
            )?;
            stream_base += REPLICATIONS as u64;
            let ks_true = ks.remove(0);
            let ks_sd_limit = if ks.is_empty() {
                Vec::new()
            } else {
                ks.remove(0)
            };
            cells.push(Fig4Cell {
                selector: *selector,
                epsilon,
                ks_true,
                ks_sd_limit,
                acceptance,
            });
        }
    }
    Ok(cells)
}

fn emit_fig4(seed: u64, scale: f64, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let cells = fig4_data(seed, scale)?;
    let mut rows = Vec::new();
    for cell in &cells {
        let base = |statistic: &str, value: f64| DiagRow {
            experiment: format!("fig4_{}", cell.selector.name()),
            epsilon: cell.epsilon,
            s: 1,
            kernel: Kernel::Uniform.name().into(),
            metric: MetricKind::Mahalanobis.name().into(),
            statistic: statistic.into(),
            value,
        };
        for ks in &cell.ks_true {
            rows.push(base("ks_gamma_21_80", *ks));
        }
        for ks in &cell.ks_sd_limit {
            rows.push(base("ks_gamma_21_20", *ks));
        }
        rows.push(base("ks_gamma_21_80_mean", mean(&cell.ks_true)));
        if !cell.ks_sd_limit.is_empty() {
            rows.push(base("ks_gamma_21_20_mean", mean(&cell.ks_sd_limit)));
        }
        rows.push(base("acceptance_rate_mean", mean(&cell.acceptance)));
    }
    let path = out_dir.join("fig4.csv");
    write_diag_csv(&path, &rows)?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// fig5: tail persistence (sojourn lengths) under S and the kernel
// ---------------------------------------------------------------------------

pub struct Fig5Cell {
    pub kernel: Kernel,
    pub epsilon: f64,
    pub s: usize,
    pub kappa45_used: f64,
    pub sojourns45: Vec<usize>,
    pub kappa50_used: f64,
    pub sojourns50: Vec<usize>,
    pub acceptance: f64,
}

pub const FIG5_S_GRID: [usize; 4] = [1, 10, 25, 50];
/// Default gamma-model proposal scales for (k, psi).
pub const GAMMA_PROPOSAL_SCALES: [f64; 2] = [2.0, 0.05];

pub fn fig5_data(seed: u64, scale: f64) -> CliResult<Vec<Fig5Cell>> {
    let model = GammaModel::default();
    let observed = SummaryVector::new(vec![4.0, 1.0])?;
    let pilot = ParamVector::new(model.param_names(), vec![16.0, 0.25]).expect("valid pilot");
    let mut rng = RandomStream::new(seed, FIG_PILOT_STREAM + 30);
    let cov = estimate_covariance(&model, &pilot, 1000, &mut rng)?;
    let metric = DistanceMetric::mahalanobis(cov)?;
    let proposal = gaussian_random_walk(GAMMA_PROPOSAL_SCALES.to_vec())?;
    let theta0 = ParamVector::new(model.param_names(), vec![16.0, 0.25]).expect("valid start");
    let n_iter = scaled(2_000_000, scale);

    let kernels = [
        (Kernel::Uniform, 2.0),
        (Kernel::Gaussian, 2.0 / 3.0f64.sqrt()),
    ];
    let mut plans = Vec::new();
    for (kernel, epsilon) in kernels {
        for s in FIG5_S_GRID {
            plans.push((kernel, epsilon, s));
        }
    }

    let cells: Vec<CliResult<Fig5Cell>> = plans
        .par_iter()
        .enumerate()
        .map(|(idx, (kernel, epsilon, s))| {
            let schedule = EpsilonSchedule::fixed(*epsilon)?;
            let spec = WeightSpec::new(*kernel, metric.clone(), *epsilon)?;
            let mut rng = RandomStream::new(seed, idx as u64);
            let trace = replicate_mcmc_run_with(
                &model,
                &proposal,
                &spec,
                &schedule,
                &observed,
                &theta0,
                n_iter,
                *s,
                &McmcOptions {
                    init: InitStrategy::SimulateRetry { budget: 100_000 },
                },
                &mut rng,
            )?;
            let (kappa45_used, sojourns45) = sojourns_with_fallback(&trace, 45.0);
            let (kappa50_used, sojourns50) = sojourns_with_fallback(&trace, 50.0);
            let acceptance = acceptance_rate(&trace, PhaseFilter::All)?;
            Ok(Fig5Cell {
                kernel: *kernel,
                epsilon: *epsilon,
                s: *s,
                kappa45_used,
                sojourns45,
                kappa50_used,
                sojourns50,
                acceptance,
            })
        })
        .collect();
    cells.into_iter().collect()
}

/// Sojourns of the shape parameter above kappa; lowers kappa in steps of 5
/// (with a warning) until the multiset is non-empty.
fn sojourns_with_fallback(trace: &ChainTrace, kappa: f64) -> (f64, Vec<usize>) {
    let mut kappa = kappa;
    loop {
        let sojourns = sojourn_lengths(trace, 0, kappa);
        if !sojourns.is_empty() || kappa <= 5.0 {
            return (kappa, sojourns);
        }
        log::warn!(
            "no sojourns above kappa = {kappa}; lowering to {}",
            kappa - 5.0
        );
        kappa -= 5.0;
    }
}

fn emit_fig5(seed: u64, scale: f64, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let cells = fig5_data(seed, scale)?;
    let mut rows = Vec::new();
    for cell in &cells {
        let base = |statistic: String, value: f64| DiagRow {
            experiment: "fig5".into(),
            epsilon: cell.epsilon,
            s: cell.s,
            kernel: cell.kernel.name().into(),
            metric: MetricKind::Mahalanobis.name().into(),
            statistic,
            value,
        };
        for (kappa_used, nominal, sojourns) in [
            (cell.kappa45_used, 45u32, &cell.sojourns45),
            (cell.kappa50_used, 50u32, &cell.sojourns50),
        ] {
            for len in sojourns {
                rows.push(base(format!("sojourn_kappa{nominal}"), *len as f64));
            }
            rows.push(base(format!("sojourn_kappa{nominal}_used"), kappa_used));
            rows.push(base(
                format!("sojourn_kappa{nominal}_median"),
                median_usize(sojourns),
            ));
            rows.push(base(
                format!("sojourn_kappa{nominal}_count"),
                sojourns.len() as f64,
            ));
        }
        rows.push(base("acceptance_rate".into(), cell.acceptance));
    }
    let path = out_dir.join("fig5.csv");
    write_diag_csv(&path, &rows)?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// fig6: error-augmented model criticism
// ---------------------------------------------------------------------------

pub struct Fig6ModelResult {
    pub model: &'static str,
    pub trace: ChainTrace,
    pub burn_in: usize,
    /// 50% HPD interval per tau component, after burn-in.
    pub hpd50: Vec<(f64, f64)>,
}

/// Error-model defaults matching the worked analysis: S = 50, Laplace
/// scales 0.75 on both statistics.
pub const FIG6_REPLICATES: usize = 50;
pub const FIG6_TAU_PRIOR_SCALE: f64 = 0.75;
pub const FIG6_TAU_PROPOSAL_SCALE: f64 = 0.25;
/// Default exponential-model proposal scale for lambda.
pub const EXPONENTIAL_PROPOSAL_SCALE: f64 = 0.15;

pub fn fig6_data(seed: u64, scale: f64) -> CliResult<Vec<Fig6ModelResult>> {
    let observed = SummaryVector::new(vec![4.0, 1.0])?;
    let n_iter = scaled(50_000, scale);
    let burn_in = scaled(5_000, scale);
    let config = ErrorModelConfig::new(
        FIG6_TAU_PROPOSAL_SCALE,
        vec![FIG6_TAU_PRIOR_SCALE, FIG6_TAU_PRIOR_SCALE],
        FIG6_REPLICATES,
    )?;

    let gamma = GammaModel::default();
    let gamma_theta0 =
        ParamVector::new(gamma.param_names(), vec![16.0, 0.25]).expect("valid start");
    let gamma_proposal = gaussian_random_walk(GAMMA_PROPOSAL_SCALES.to_vec())?;

    let exponential = ExponentialModel::default();
    let expo_theta0 = ParamVector::new(exponential.param_names(), vec![0.25]).expect("valid start");
    let expo_proposal = gaussian_random_walk(vec![EXPONENTIAL_PROPOSAL_SCALE])?;

    let runs: Vec<CliResult<Fig6ModelResult>> = vec![("gamma", 0u64), ("exponential", 1u64)]
        .into_par_iter()
        .map(|(name, stream)| {
            let mut rng = RandomStream::new(seed, stream);
            let trace = match name {
                "gamma" => error_augmented_run(
                    &gamma,
                    &gamma_proposal,
                    &config,
                    &observed,
                    &gamma_theta0,
                    n_iter,
                    &mut rng,
                )?,
                _ => error_augmented_run(
                    &exponential,
                    &expo_proposal,
                    &config,
                    &observed,
                    &expo_theta0,
                    n_iter,
                    &mut rng,
                )?,
            };
            let mut hpd50 = Vec::new();
            for comp in 0..trace.tau_dim() {
                let kept: Vec<f64> = trace.tau_component(comp).skip(burn_in).collect();
                hpd50.push(hpd_interval(&kept, 0.5).map_err(|e| CliError::Runtime(e.to_string()))?);
            }
            Ok(Fig6ModelResult {
                model: name,
                trace,
                burn_in,
                hpd50,
            })
        })
        .collect();
    runs.into_iter().collect()
}

fn emit_fig6(seed: u64, scale: f64, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let results = fig6_data(seed, scale)?;
    let mut rows = Vec::new();
    let mut paths = Vec::new();
    for result in &results {
        let path = write_trace(
            out_dir,
            &format!("fig6_tau_{}", result.model),
            &result.trace,
        )?;
        paths.push(path);
        for (comp, (lo, hi)) in result.hpd50.iter().enumerate() {
            for (suffix, value) in [("lo", *lo), ("hi", *hi)] {
                rows.push(DiagRow {
                    experiment: format!("fig6_{}", result.model),
                    epsilon: f64::NAN,
                    s: FIG6_REPLICATES,
                    kernel: Kernel::Biweight.name().into(),
                    metric: "none".into(),
                    statistic: format!("tau{}_hpd50_{suffix}", comp + 1),
                    value,
                });
            }
        }
    }
    let path = out_dir.join("fig6.csv");
    write_diag_csv(&path, &rows)?;
    paths.push(path);
    Ok(paths)
}
