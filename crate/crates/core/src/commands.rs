//! The subcommands of the `doublepass` binary. Each one resolves its
//! configuration, runs, writes its tables plus a manifest into the output
//! directory, and reports whether every result passed its validity checks.

use std::path::{Path, PathBuf};

use crate::config::{self, ConfigSource, RunConfig};
use crate::engine::{filter_with_innovations, TrajectoryOptions};
use crate::error::{Error, Result};
use crate::experiments::{
    detect_saturation, optimize_k, powerlaw_fit, qfi_point, run_sweep, Representation, Saturation,
};
use crate::noise::NoiseSource;
use crate::output::{self, ExclusionCount, FitSummary, RunManifest};
use crate::spin::{build_spin_operators, SpinQuantum};
use crate::state::{coherent_state_x, coherent_vector_x, ConditionalState};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DOUBLEPASS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "doublepass-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Trajectory,
    Qfi,
    Sweep,
    OptimizeK,
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Trajectory => "trajectory",
            Command::Qfi => "qfi",
            Command::Sweep => "sweep",
            Command::OptimizeK => "optimize-k",
            Command::Fit => "fit",
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// False if any trajectory or ensemble point failed a validity check;
    /// the files are written regardless.
    pub valid: bool,
    pub notes: Vec<String>,
}

/// `--out-dir` if given, else the environment variable, else
/// [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Loads the configuration and runs `command`.
pub fn run(command: Command, config_path: Option<&Path>, overrides: &[String], out_dir: &Path) -> Result<Outcome> {
    let overrides = config::parse_overrides(overrides)?;
    let (cfg, source) = config::load(config_path, &overrides)?;
    if let ConfigSource::Manifest { command: recorded, path } = &source {
        if recorded != command.name() {
            return Err(Error::Config(format!(
                "{} was written by '{recorded}', not '{}'",
                path.display(),
                command.name()
            )));
        }
    }
    run_config(command, cfg, out_dir)
}

pub fn run_config(command: Command, cfg: RunConfig, out_dir: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    match command {
        Command::Trajectory => cmd_trajectory(&cfg, out_dir),
        Command::Qfi => cmd_qfi(&cfg, out_dir),
        Command::Sweep => cmd_sweep(&cfg, out_dir),
        Command::OptimizeK => cmd_optimize_k(&cfg, out_dir),
        Command::Fit => cmd_fit(cfg, out_dir),
    }
}

fn finish(mut manifest: RunManifest<'_>, out_dir: &Path, mut files: Vec<PathBuf>, valid: bool, notes: Vec<String>) -> Result<Outcome> {
    manifest.outputs = files.iter().filter_map(|f| f.file_name().map(PathBuf::from)).collect();
    let path = out_dir.join(format!("{}.manifest.json", manifest.command));
    output::write_json(&path, &manifest)?;
    files.push(path);
    Ok(Outcome { files, valid, notes })
}

/// Double-pass and single-pass (`K = 0`) filters driven by the same
/// innovations.
pub fn cmd_trajectory(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let ops = build_spin_operators(SpinQuantum::new(cfg.f)?)?;
    let (m, k) = cfg.rates()?;
    let ens = cfg.ensemble();
    let p = ens.params(m, k)?;
    let rho0 = match cfg.representation {
        Representation::Vector => ConditionalState::Vector(coherent_vector_x(&ops)),
        Representation::Density => ConditionalState::Density(coherent_state_x(&ops)),
    };
    let dw = NoiseSource::new(cfg.seed, cfg.stream)
        .refined(cfg.refinement)
        .wiener_increments(p.n_steps, p.dt)?;
    let opts = TrajectoryOptions::default();
    let (_, double) = filter_with_innovations(&rho0, &ops, &p, &dw, &opts)?;
    let (_, single) = filter_with_innovations(&rho0, &ops, &p.with_rates(m, 0.0), &dw, &opts)?;

    let path = out_dir.join("trajectory.csv");
    output::write_trajectory_csv(&path, &double, &single)?;
    let mut notes = Vec::new();
    for (name, run) in [("double-pass", &double), ("single-pass", &single)] {
        if let Some(step) = run.first_invalid_step {
            notes.push(format!("{name} filter became invalid at step {step}"));
        }
    }
    let manifest = RunManifest::new(Command::Trajectory.name(), cfg);
    finish(manifest, out_dir, vec![path], double.valid && single.valid, notes)
}

pub fn cmd_qfi(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (m, k) = cfg.rates()?;
    let point = qfi_point(SpinQuantum::new(cfg.f)?, m, k, &cfg.ensemble())?;
    let samples = out_dir.join("qfi_samples.csv");
    let summary = out_dir.join("qfi_summary.csv");
    output::write_qfi_samples_csv(&samples, &point)?;
    output::write_qfi_summary_csv(&summary, &point)?;
    let mut notes = Vec::new();
    if !point.valid {
        notes.push(format!(
            "{} of {} triples excluded",
            point.estimate.n_excluded,
            point.samples.len()
        ));
    }
    if point.n_purity_flagged > 0 {
        notes.push(format!("{} samples below the purity flag", point.n_purity_flagged));
    }
    let mut manifest = RunManifest::new(Command::Qfi.name(), cfg);
    manifest.exclusions.push(ExclusionCount {
        f: point.f,
        excluded: point.estimate.n_excluded,
        total: point.samples.len(),
    });
    finish(manifest, out_dir, vec![samples, summary], point.valid, notes)
}

#[derive(serde::Serialize)]
struct SweepSummary {
    saturation: Option<Saturation>,
    invalid_f: Vec<f64>,
    purity_flagged: Vec<(f64, usize)>,
    /// Spin sizes where deltaB is below the Heisenberg reference by more
    /// than its error bar.
    below_heisenberg: Vec<f64>,
}

pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let result = run_sweep(&cfg.sweep())?;
    let table = out_dir.join("sweep.csv");
    let samples = out_dir.join("sweep_samples.csv");
    let summary_path = out_dir.join("sweep_summary.json");
    output::write_sweep_csv(&table, &result)?;
    output::write_sweep_samples_csv(&samples, &result)?;

    let points: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.f, r.delta_b)).collect();
    let summary = SweepSummary {
        saturation: detect_saturation(&points),
        invalid_f: result.rows.iter().filter(|r| !r.valid).map(|r| r.f).collect(),
        purity_flagged: result
            .points
            .iter()
            .filter(|p| p.n_purity_flagged > 0)
            .map(|p| (p.f, p.n_purity_flagged))
            .collect(),
        below_heisenberg: result
            .rows
            .iter()
            .filter(|r| r.delta_b + r.delta_b_err < r.refs.heisenberg)
            .map(|r| r.f)
            .collect(),
    };
    output::write_json(&summary_path, &summary)?;

    let mut notes = Vec::new();
    if let Some(s) = &summary.saturation {
        notes.push(format!("field uncertainty saturates at F = {}", s.f));
    }
    if !summary.below_heisenberg.is_empty() {
        notes.push(format!("deltaB below the Heisenberg reference at F = {:?}", summary.below_heisenberg));
    }
    if !summary.invalid_f.is_empty() {
        notes.push(format!("exclusion limit exceeded at F = {:?}", summary.invalid_f));
    }
    let mut manifest = RunManifest::new(Command::Sweep.name(), cfg);
    manifest.exclusions = result
        .points
        .iter()
        .map(|p| ExclusionCount {
            f: p.f,
            excluded: p.estimate.n_excluded,
            total: p.samples.len(),
        })
        .collect();
    let valid = summary.invalid_f.is_empty();
    finish(manifest, out_dir, vec![table, samples, summary_path], valid, notes)
}

pub fn cmd_optimize_k(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (m, _) = cfg.rates()?;
    let opt = optimize_k(SpinQuantum::new(cfg.f)?, m, &cfg.ensemble(), &cfg.k_grid())?;
    let table = out_dir.join("optimize_k.csv");
    let summary = out_dir.join("optimize_k.json");
    output::write_optimize_k_csv(&table, &opt)?;
    output::write_json(
        &summary,
        &serde_json::json!({
            "F": opt.f,
            "M": opt.m,
            "K_star": opt.k_star,
            "qfi_at_K_star": opt.qfi_at_k_star,
            "warning": opt.warning,
        }),
    )?;
    let mut notes = vec![format!("K* = {:.4e}", opt.k_star)];
    if opt.warning {
        notes.push("grid profile has several significant maxima; K* is the best grid point".into());
    }
    let valid = opt.evaluations.iter().all(|e| e.valid);
    let manifest = RunManifest::new(Command::OptimizeK.name(), cfg);
    finish(manifest, out_dir, vec![table, summary], valid, notes)
}

/// Power-law fit of `deltaB` against `F` from a sweep table. Rows whose
/// `deltaB` is not a positive number are skipped.
pub fn cmd_fit(mut cfg: RunConfig, out_dir: &Path) -> Result<Outcome> {
    let input = cfg.input.clone().unwrap_or_else(|| out_dir.join("sweep.csv"));
    let all = output::read_sweep_points(&input)?;
    let points: Vec<(f64, f64)> = all.iter().copied().filter(|p| p.1.is_finite() && p.1 > 0.0).collect();
    let mut notes = Vec::new();
    if points.len() < all.len() {
        notes.push(format!("skipped {} rows without a usable deltaB", all.len() - points.len()));
    }
    let fit = powerlaw_fit(&points)?;
    let path = out_dir.join("fit.json");
    output::write_json(&path, &FitSummary::new(&fit, &input))?;
    notes.push(format!("slope {:.4}", fit.slope));
    cfg.input = Some(input);
    let manifest = RunManifest::new(Command::Fit.name(), &cfg);
    finish(manifest, out_dir, vec![path], true, notes)
}
