//! CSV tables and JSON manifests. Floats are written with 17 significant
//! digits so that reruns can be compared byte for byte.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::engine::TrajectoryOutput;
use crate::error::{Error, Result};
use crate::experiments::{KOptimum, QfiPoint, ScalingFit, SweepResult};

pub const TRAJECTORY_HEADER: [&str; 7] = [
    "t",
    "fz_double",
    "var_fz_double",
    "fz_single",
    "var_fz_single",
    "purity_double",
    "purity_single",
];
pub const QFI_SAMPLES_HEADER: [&str; 4] = ["stream_index", "conditional_qfi", "purity", "valid"];
pub const QFI_SUMMARY_HEADER: [&str; 5] = ["mean", "sem", "deltaB", "deltaB_err_sem", "deltaB_err_raw"];
pub const SWEEP_HEADER: [&str; 12] = [
    "F",
    "N",
    "M",
    "K",
    "qfi_mean",
    "qfi_sem",
    "deltaB",
    "deltaB_err",
    "shotnoise_ref",
    "heisenberg_ref",
    "twobody_ref",
    "excluded",
];
pub const SWEEP_SAMPLES_HEADER: [&str; 5] = ["F", "stream_index", "conditional_qfi", "purity", "valid"];
pub const OPTIMIZE_K_HEADER: [&str; 4] = ["K", "qfi_mean", "qfi_sem", "valid"];

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trajectory_csv(path: &Path, double: &TrajectoryOutput, single: &TrajectoryOutput) -> Result<()> {
    if double.times.len() != single.times.len() {
        return Err(Error::RecordLength {
            expected: double.times.len(),
            found: single.times.len(),
        });
    }
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for i in 0..double.times.len() {
        w.write_record([
            fmt_f64(double.times[i]),
            fmt_f64(double.fz[i]),
            fmt_f64(double.var_fz[i]),
            fmt_f64(single.fz[i]),
            fmt_f64(single.var_fz[i]),
            fmt_f64(double.purity[i]),
            fmt_f64(single.purity[i]),
        ])?;
    }
    finish(w, path)
}

pub fn write_qfi_samples_csv(path: &Path, point: &QfiPoint) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(QFI_SAMPLES_HEADER)?;
    for s in &point.samples {
        w.write_record([
            s.stream_index.to_string(),
            fmt_f64(s.conditional_qfi),
            fmt_f64(s.purity),
            s.valid.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_qfi_summary_csv(path: &Path, point: &QfiPoint) -> Result<()> {
    let e = &point.estimate;
    let mut w = writer(path)?;
    w.write_record(QFI_SUMMARY_HEADER)?;
    w.write_record([e.mean, e.sem, e.delta_b, e.delta_b_err, e.delta_b_err_raw].map(fmt_f64))?;
    finish(w, path)
}

pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in &result.rows {
        let mut rec: Vec<String> = [
            r.f,
            r.n_atoms,
            r.m,
            r.k,
            r.qfi_mean,
            r.qfi_sem,
            r.delta_b,
            r.delta_b_err,
            r.refs.shotnoise,
            r.refs.heisenberg,
            r.refs.two_body,
        ]
        .map(fmt_f64)
        .to_vec();
        rec.push(r.excluded.to_string());
        w.write_record(rec)?;
    }
    finish(w, path)
}

pub fn write_sweep_samples_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_SAMPLES_HEADER)?;
    for p in &result.points {
        for s in &p.samples {
            w.write_record([
                fmt_f64(p.f),
                s.stream_index.to_string(),
                fmt_f64(s.conditional_qfi),
                fmt_f64(s.purity),
                s.valid.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

pub fn write_optimize_k_csv(path: &Path, opt: &KOptimum) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(OPTIMIZE_K_HEADER)?;
    for e in &opt.evaluations {
        w.write_record([fmt_f64(e.k), fmt_f64(e.qfi), fmt_f64(e.sem), e.valid.to_string()])?;
    }
    finish(w, path)
}

/// `(F, deltaB)` pairs read from a sweep table.
pub fn read_sweep_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column {name}", path.display())))
    };
    let (fi, di) = (column("F")?, column("deltaB")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad number '{}'", path.display(), &rec[i])))
        };
        out.push((parse(fi)?, parse(di)?));
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary<'a> {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub points: &'a [(f64, f64)],
    pub input: &'a Path,
}

impl<'a> FitSummary<'a> {
    pub fn new(fit: &'a ScalingFit, input: &'a Path) -> Self {
        Self {
            slope: fit.slope,
            intercept: fit.intercept,
            residual_rms: fit.residual_rms,
            points: &fit.points,
            input,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Units {
    pub gamma: f64,
    pub tau: f64,
    pub field: &'static str,
    pub rates: &'static str,
}

/// Excluded triples at one spin size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExclusionCount {
    #[serde(rename = "F")]
    pub f: f64,
    pub excluded: usize,
    pub total: usize,
}

/// Record of one command invocation, sufficient to reproduce its tables.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub seed: u64,
    pub timestamp_unix: u64,
    pub version: &'static str,
    pub units: Units,
    pub exclusions: Vec<ExclusionCount>,
    pub outputs: Vec<PathBuf>,
}

impl<'a> RunManifest<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command,
            config,
            seed: config.seed,
            timestamp_unix,
            version: env!("CARGO_PKG_VERSION"),
            units: Units {
                gamma: 1.0,
                tau: 1.0,
                field: "B in units of gamma",
                rates: "M, K in units of 1/tau",
            },
            exclusions: Vec::new(),
            outputs: Vec::new(),
        }
    }
}
