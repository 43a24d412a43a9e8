//! CSV writers shared by the runner and the figure suites.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lfmcmc::sampler::ChainTrace;

use crate::CliResult;

/// One tidy diagnostics row: `experiment,epsilon,s,kernel,metric,statistic,value`.
#[derive(Clone, Debug)]
pub struct DiagRow {
    pub experiment: String,
    pub epsilon: f64,
    pub s: usize,
    pub kernel: String,
    pub metric: String,
    pub statistic: String,
    pub value: f64,
}

pub const DIAG_HEADER: &str = "experiment,epsilon,s,kernel,metric,statistic,value";

pub fn write_diag_csv(path: &Path, rows: &[DiagRow]) -> CliResult<()> {
    let mut w = buffered(path)?;
    writeln!(w, "{DIAG_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.experiment, r.epsilon, r.s, r.kernel, r.metric, r.statistic, r.value
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a trace CSV plus its sidecar `.meta` file; returns the CSV path.
pub fn write_trace(dir: &Path, stem: &str, trace: &ChainTrace) -> CliResult<PathBuf> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = buffered(&csv_path)?;
    trace.write_csv(&mut w)?;
    w.flush()?;

    let meta_path = dir.join(format!("{stem}.meta"));
    let mut w = buffered(&meta_path)?;
    trace.write_meta(&mut w)?;
    w.flush()?;
    Ok(csv_path)
}

pub fn buffered(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}
