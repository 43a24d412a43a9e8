//! End-to-end harness tests: config handling, output schemas, determinism
//! and the prior-predictive exploration.

use std::fs;
use std::path::Path;
use std::process::Command;

use lfmcmc_cli::config::ExperimentConfig;
use lfmcmc_cli::runner::{prior_predictive, run_experiment, run_mcmc_chain};

fn base_config(out_dir: &Path, extra: &str) -> ExperimentConfig {
    let toml = format!(
        r#"
[experiment]
id = "itest"
sampler = "lf_mcmc"
seed = 99
n_chains = 3
n_iter = 400
s = 1
burn_in = 50
thin = 1
out_dir = "{}"

[model]
name = "exponential"
observed = [4.0, 1.0]

[weight]
kernel = "uniform"
metric = "mahalanobis"
pilot_theta = [0.25]

[schedule]
schedule = "self_scaling"
target_epsilon = 3.0

[proposal]
scales = [1.0]

[init]
theta0 = [0.5]
{extra}
"#,
        out_dir.display()
    );
    ExperimentConfig::from_toml(&toml).expect("valid config")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn identical_config_and_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out_a = run_experiment(&base_config(&a, "")).unwrap();
    let out_b = run_experiment(&base_config(&b, "")).unwrap();
    assert_eq!(out_a.trace_paths.len(), 3);
    for (pa, pb) in out_a.trace_paths.iter().zip(&out_b.trace_paths) {
        assert_eq!(read(pa), read(pb), "trace CSVs differ");
    }
    assert_eq!(read(&out_a.summary_path), read(&out_b.summary_path));
}

#[test]
fn chain_traces_depend_only_on_their_stream() {
    // Re-running chain 2 alone reproduces its trace from the batch run.
    let dir = tempfile::tempdir().unwrap();
    let config = base_config(&dir.path().join("batch"), "");
    let outputs = run_experiment(&config).unwrap();
    let batch_chain2 = read(&outputs.trace_paths[2]);

    let built = lfmcmc_cli::config::build(&config).unwrap();
    let solo = run_mcmc_chain(&built, &config, 2).unwrap();
    let mut csv = Vec::new();
    solo.write_csv(&mut csv).unwrap();
    assert_eq!(batch_chain2, String::from_utf8(csv).unwrap());
}

#[test]
fn zero_iteration_run_emits_flagged_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = base_config(dir.path(), "");
    config.experiment.n_iter = 0;
    config.experiment.n_chains = 1;
    let outputs = run_experiment(&config).unwrap();
    let trace = read(&outputs.trace_paths[0]);
    assert_eq!(trace.lines().count(), 1, "header only");
    assert!(trace.starts_with("t,phase,accepted,epsilon,rho,theta_1"));
    let summary = read(&outputs.summary_path);
    assert!(summary.contains("empty_trace,1"), "summary: {summary}");
}

#[test]
fn trace_csv_matches_declared_schema() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = run_experiment(&base_config(dir.path(), "")).unwrap();
    let text = read(&outputs.trace_paths[0]);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "t,phase,accepted,epsilon,rho,theta_1");
    let n_cols = header.split(',').count();
    let mut prev_eps = f64::INFINITY;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), n_cols, "row {i}");
        assert_eq!(fields[0].parse::<usize>().unwrap(), i + 1);
        assert!(matches!(fields[1], "burn_in" | "sampling"));
        assert!(matches!(fields[2], "0" | "1"));
        let eps: f64 = fields[3].parse().unwrap();
        assert!(eps <= prev_eps, "epsilon not monotone at row {i}");
        assert!(eps >= 3.0);
        prev_eps = eps;
        let _: f64 = fields[4].parse().unwrap();
        let _: f64 = fields[5].parse().unwrap();
    }

    // Sidecar metadata exists and carries the digest and seed.
    let meta = read(&outputs.trace_paths[0].with_extension("meta"));
    assert!(meta.contains("seed = 99"));
    assert!(meta.contains("config_digest = "));
    let summary = read(&outputs.summary_path);
    assert!(summary.starts_with("experiment,chain,epsilon,s,kernel,metric,statistic,value\n"));
    assert!(summary.contains("acceptance_rate"));
    assert!(summary.contains("post_mean_lambda"));
    assert!(summary.contains("ks_reference"));

    // The pilot-estimated covariance is serialized next to the run, as a
    // row-major list.
    let cov_path = outputs.summary_path.with_file_name("itest_covariance.csv");
    let cov = read(&cov_path);
    let values: Vec<f64> = cov
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 4);
    assert_eq!(values[1], values[2], "symmetric");
}

#[test]
fn rejection_run_writes_samples_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!(
        r#"
[experiment]
id = "rej"
sampler = "rejection"
seed = 5
n_chains = 2
out_dir = "{}"

[model]
name = "normal_toy"

[weight]
kernel = "uniform"
metric = "euclidean"
epsilon = 0.5

[rejection]
n_accept = 50
max_draws = 100000
"#,
        dir.path().display()
    );
    let config = ExperimentConfig::from_toml(&toml).unwrap();
    let outputs = run_experiment(&config).unwrap();
    assert_eq!(outputs.trace_paths.len(), 2);
    let samples = read(&outputs.trace_paths[0]);
    assert!(samples.starts_with("theta_1\n"));
    assert_eq!(samples.lines().count(), 51);
    let summary = read(&outputs.summary_path);
    assert!(summary.contains("acceptance_rate"));
    assert!(summary.contains("exhausted,0"));
}

#[test]
fn prior_predictive_row_count_and_degenerate_range() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!(
        r#"
[experiment]
id = "pp"
sampler = "lf_mcmc"
seed = 3
out_dir = "{}"

[model]
name = "exponential"
observed = [4.0, 1.0]

[prior_predictive]
ranges = [[0.0, 20.0]]
n_draws = 2000
"#,
        dir.path().display()
    );
    let config = ExperimentConfig::from_toml(&toml).unwrap();
    let path = prior_predictive(&config).unwrap();
    let text = read(&path);
    assert_eq!(text.lines().next().unwrap(), "lambda,t_1,t_2");
    assert_eq!(text.lines().count(), 2001);

    let mut config = config;
    config.prior_predictive.as_mut().unwrap().ranges = vec![[2.0, 2.0]];
    config.experiment.id = "pp2".into();
    let path = prior_predictive(&config).unwrap();
    for line in read(&path).lines().skip(1) {
        assert_eq!(line.split(',').next().unwrap(), "2");
    }
}

#[test]
fn prior_predictive_summary_match_favors_gamma() {
    // Fraction of draws whose summaries land near T(y) = (4, 1) is larger
    // under the Gamma model than under the Exponential over the same box.
    let dir = tempfile::tempdir().unwrap();
    let frac = |model: &str, ranges: &str, id: &str| -> f64 {
        let toml = format!(
            r#"
[experiment]
id = "{id}"
sampler = "lf_mcmc"
seed = 11
out_dir = "{}"

[model]
name = "{model}"
observed = [4.0, 1.0]

[prior_predictive]
ranges = {ranges}
n_draws = 100000
"#,
            dir.path().display()
        );
        let config = ExperimentConfig::from_toml(&toml).unwrap();
        let path = prior_predictive(&config).unwrap();
        let text = read(&path);
        let mut hits = 0usize;
        let mut total = 0usize;
        for line in text.lines().skip(1) {
            let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            let (mean, sd) = (fields[fields.len() - 2], fields[fields.len() - 1]);
            total += 1;
            if (mean - 4.0).abs() <= 0.5 && (sd - 1.0).abs() <= 0.5 {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    };
    let expo = frac("exponential", "[[0.0, 20.0]]", "ppe");
    let gamma = frac("gamma", "[[0.0, 20.0], [0.0, 20.0]]", "ppg");
    assert!(
        expo < gamma,
        "exponential fraction {expo} should be below gamma fraction {gamma}"
    );
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_lfmcmc");
    let dir = tempfile::tempdir().unwrap();

    // Config error: unknown key, exit 1, message names the key.
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "[experiment]\nid = \"x\"\nsampler = \"lf_mcmc\"\nseed = 1\nbogus = 2\n\n[model]\nname = \"exponential\"\n",
    )
    .unwrap();
    let out = Command::new(bin).arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    // Unknown figure id: exit 1.
    let out = Command::new(bin)
        .args(["figure", "fig9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Healthy tiny run: exit 0.
    let good = dir.path().join("good.toml");
    fs::write(
        &good,
        format!(
            r#"
[experiment]
id = "ok"
sampler = "lf_mcmc"
seed = 1
n_iter = 50
out_dir = "{}"

[model]
name = "normal_toy"

[weight]
kernel = "gaussian"
metric = "euclidean"

[schedule]
schedule = "fixed"
target_epsilon = 1.0

[proposal]
scales = [1.0]

[init]
theta0 = [0.0]
"#,
            dir.path().display()
        ),
    )
    .unwrap();
    let out = Command::new(bin).arg("run").arg(&good).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Runtime failure (initialization cannot succeed): exit 2.
    let stuck = dir.path().join("stuck.toml");
    fs::write(
        &stuck,
        format!(
            r#"
[experiment]
id = "stuck"
sampler = "lf_mcmc"
seed = 1
n_iter = 50
out_dir = "{}"

[model]
name = "normal_toy"

[weight]
kernel = "uniform"
metric = "euclidean"

[schedule]
schedule = "fixed"
target_epsilon = 0.000000001

[proposal]
scales = [1.0]

[init]
theta0 = [9.0]
budget = 20
"#,
            dir.path().display()
        ),
    )
    .unwrap();
    let out = Command::new(bin).arg("run").arg(&stuck).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn golden_tiny_run_is_stable() {
    // Frozen output of a tiny seeded run; catches accidental changes to the
    // sampler's draw order or the CSV format.
    let dir = tempfile::tempdir().unwrap();
    let mut config = base_config(dir.path(), "");
    config.experiment.id = "golden".into();
    config.experiment.n_iter = 40;
    config.experiment.n_chains = 1;
    let outputs = run_experiment(&config).unwrap();
    let got = read(&outputs.trace_paths[0]);
    let want = include_str!("data/golden_trace.csv");
    assert_eq!(got, want, "golden trace drifted");
}

mod figures_smoke {
    use super::read;
    use lfmcmc_cli::figures::{figure_suite, FigureId};
    use std::collections::HashMap;
    use std::path::Path;

    /// Every figure CSV parses under its declared header: same column
    /// count per row, numeric value columns.
    fn check_diag_schema(path: &Path) -> Vec<HashMap<String, String>> {
        let text = read(path);
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().expect("header").split(',').collect();
        assert_eq!(
            header,
            vec![
                "experiment",
                "epsilon",
                "s",
                "kernel",
                "metric",
                "statistic",
                "value"
            ],
            "{}",
            path.display()
        );
        let mut rows = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), header.len(), "{}: {line}", path.display());
            let _: f64 = fields[1].parse().expect("epsilon parses");
            let _: usize = fields[2].parse().expect("s parses");
            let _: f64 = fields[6].parse().expect("value parses");
            rows.push(
                header
                    .iter()
                    .map(|h| h.to_string())
                    .zip(fields.iter().map(|f| f.to_string()))
                    .collect(),
            );
        }
        rows
    }

    #[test]
    fn fig2_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let paths = figure_suite(FigureId::Fig2, 3, 0.05, dir.path()).unwrap();
        assert!(paths.iter().any(|p| p.ends_with("fig2_traces.csv")));
        let traces = read(&dir.path().join("fig2_traces.csv"));
        assert!(traces.starts_with("chain,t,lambda,epsilon,phase,accepted\n"));
        let chains: std::collections::HashSet<&str> = traces
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert_eq!(chains.len(), 4);
        let rates = check_diag_schema(&dir.path().join("fig2_rates.csv"));
        assert_eq!(rates.len(), 4, "one acceptance-rate row per target");
    }

    #[test]
    fn fig3_has_25_replicate_entries_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        figure_suite(FigureId::Fig3, 3, 0.02, dir.path()).unwrap();
        let rows = check_diag_schema(&dir.path().join("fig3.csv"));
        let mut ks_counts: HashMap<String, usize> = HashMap::new();
        for row in &rows {
            if row["statistic"] == "ks" {
                let key = format!(
                    "{}/{}/{}/{}",
                    row["experiment"], row["kernel"], row["metric"], row["epsilon"]
                );
                *ks_counts.entry(key).or_default() += 1;
            }
        }
        assert!(!ks_counts.is_empty());
        for (cell, count) in ks_counts {
            assert_eq!(count, 25, "cell {cell}");
        }
    }

    #[test]
    fn fig4_has_one_mean_ks_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        figure_suite(FigureId::Fig4, 3, 0.02, dir.path()).unwrap();
        let rows = check_diag_schema(&dir.path().join("fig4.csv"));
        let mut mean_rows: HashMap<String, usize> = HashMap::new();
        let mut cells: std::collections::HashSet<String> = Default::default();
        for row in &rows {
            let key = format!("{}/{}", row["experiment"], row["epsilon"]);
            cells.insert(key.clone());
            if row["statistic"] == "ks_gamma_21_80_mean" {
                *mean_rows.entry(key).or_default() += 1;
            }
        }
        for cell in &cells {
            assert_eq!(mean_rows.get(cell), Some(&1), "cell {cell}");
        }
        // The sd panel also carries the alternative-reference KS.
        assert!(rows
            .iter()
            .any(|r| r["experiment"] == "fig4_sd" && r["statistic"] == "ks_gamma_21_20_mean"));
    }

    #[test]
    fn fig5_sojourn_multisets_nonempty_at_small_scale() {
        let dir = tempfile::tempdir().unwrap();
        figure_suite(FigureId::Fig5, 3, 0.1, dir.path()).unwrap();
        let rows = check_diag_schema(&dir.path().join("fig5.csv"));
        let mut sojourns: HashMap<String, usize> = HashMap::new();
        for row in &rows {
            if row["statistic"] == "sojourn_kappa45" {
                let key = format!("{}/{}", row["kernel"], row["s"]);
                *sojourns.entry(key).or_default() += 1;
            }
        }
        assert_eq!(
            sojourns.len(),
            8,
            "all cells have kappa-45 sojourns: {sojourns:?}"
        );
    }

    #[test]
    fn fig6_outputs() {
        let dir = tempfile::tempdir().unwrap();
        figure_suite(FigureId::Fig6, 3, 0.04, dir.path()).unwrap();
        for model in ["gamma", "exponential"] {
            let trace = read(&dir.path().join(format!("fig6_tau_{model}.csv")));
            let header = trace.lines().next().unwrap();
            assert!(header.ends_with("tau_1,tau_2"), "{header}");
            assert_eq!(trace.lines().count(), 2001);
        }
        let rows = check_diag_schema(&dir.path().join("fig6.csv"));
        let stats: std::collections::HashSet<String> =
            rows.iter().map(|r| r["statistic"].clone()).collect();
        for want in [
            "tau1_hpd50_lo",
            "tau1_hpd50_hi",
            "tau2_hpd50_lo",
            "tau2_hpd50_hi",
        ] {
            assert!(stats.contains(want), "{want} missing");
        }
    }
}
