//! Run configuration: a flat-key TOML file, or the `config` object of a
//! previously written manifest, with `--key value` overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::NoiseSharing;
use crate::error::{Error, Result};
use crate::experiments::{CouplingSchedule, EnsembleSettings, KGrid, Representation, SweepConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    FixedMk,
    ScalingLaw,
}

/// Every setting any subcommand reads. Keys not listed here are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Stream index used by the `trajectory` command.
    pub stream: u64,
    pub n_trajectories: usize,
    pub db: f64,
    pub dt: f64,
    pub tau: f64,
    pub gamma: f64,
    pub b: f64,
    /// Spin size for single-point commands.
    pub f: f64,
    pub f_values: Vec<f64>,
    pub mode: Mode,
    pub m: f64,
    pub k: f64,
    pub c: f64,
    pub alpha: f64,
    pub sharing: NoiseSharing,
    pub representation: Representation,
    pub refinement: u32,
    pub spin_per_atom: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_points: usize,
    pub k_refine: usize,
    /// Sweep table read by the `fit` command; defaults to `sweep.csv` in the
    /// output directory.
    pub input: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = EnsembleSettings::default();
        let g = KGrid::default();
        Self {
            seed: e.seed,
            stream: 0,
            n_trajectories: e.n_trajectories,
            db: e.db,
            dt: e.dt,
            tau: e.tau,
            gamma: e.gamma,
            b: e.b_true,
            f: 100.0,
            f_values: (1..=10).map(|i| 20.0 * i as f64).collect(),
            mode: Mode::FixedMk,
            m: 1.0,
            k: 1e-4,
            c: 0.589,
            alpha: 0.77,
            sharing: e.sharing,
            representation: e.representation,
            refinement: e.refinement,
            spin_per_atom: 0.5,
            k_min: g.k_min,
            k_max: g.k_max,
            k_points: g.points,
            k_refine: g.refine_iterations,
            input: None,
        }
    }
}

impl RunConfig {
    pub fn ensemble(&self) -> EnsembleSettings {
        EnsembleSettings {
            n_trajectories: self.n_trajectories,
            db: self.db,
            dt: self.dt,
            tau: self.tau,
            gamma: self.gamma,
            b_true: self.b,
            seed: self.seed,
            sharing: self.sharing,
            representation: self.representation,
            refinement: self.refinement,
        }
    }

    pub fn schedule(&self) -> CouplingSchedule {
        match self.mode {
            Mode::FixedMk => CouplingSchedule::FixedMk { m: self.m, k: self.k },
            Mode::ScalingLaw => CouplingSchedule::ScalingLaw {
                c: self.c,
                alpha: self.alpha,
            },
        }
    }

    /// `(M, K)` at the single-point spin size `f`.
    pub fn rates(&self) -> Result<(f64, f64)> {
        self.schedule().rates(self.f, self.tau)
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            f_values: self.f_values.clone(),
            schedule: self.schedule(),
            ensemble: self.ensemble(),
            spin_per_atom: self.spin_per_atom,
        }
    }

    pub fn k_grid(&self) -> KGrid {
        KGrid {
            k_min: self.k_min,
            k_max: self.k_max,
            points: self.k_points,
            refine_iterations: self.k_refine,
        }
    }
}

/// Parses `--key value` pairs. Keys may use `-` or `_`.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key, found '{arg}'")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.replace('-', "_"), v.to_string()));
            continue;
        }
        let value = it
            .next()
            .ok_or_else(|| Error::Config(format!("missing value for --{key}")))?;
        out.push((key.replace('-', "_"), value.clone()));
    }
    Ok(out)
}

fn parse_scalar(raw: &str) -> toml::Value {
    let trimmed = raw.trim();
    if let Ok(v) = trimmed.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = trimmed.parse::<f64>() {
        return toml::Value::Float(v);
    }
    match trimmed {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(trimmed.to_string()),
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    if raw.contains(',') {
        toml::Value::Array(raw.split(',').filter(|s| !s.trim().is_empty()).map(parse_scalar).collect())
    } else {
        parse_scalar(raw)
    }
}

const FLOAT_KEYS: &[&str] = &[
    "db", "dt", "tau", "gamma", "b", "f", "m", "k", "c", "alpha", "spin_per_atom", "k_min", "k_max",
];

/// Integers written for float-valued keys are widened so `f = 100` works.
fn widen_floats(table: &mut toml::Table) {
    for (key, value) in table.iter_mut() {
        let float_key = FLOAT_KEYS.contains(&key.as_str()) || key == "f_values";
        if !float_key {
            continue;
        }
        match value {
            toml::Value::Integer(i) => *value = toml::Value::Float(*i as f64),
            toml::Value::Array(items) => {
                for item in items {
                    if let toml::Value::Integer(i) = item {
                        *item = toml::Value::Float(*i as f64);
                    }
                }
            }
            _ => {}
        }
    }
}

fn build(mut table: toml::Table, overrides: &[(String, String)]) -> Result<RunConfig> {
    for (k, v) in overrides {
        table.insert(k.clone(), parse_override_value(v));
    }
    widen_floats(&mut table);
    // a single value for a list key becomes a one-element list
    if let Some(v) = table.get_mut("f_values") {
        if !matches!(v, toml::Value::Array(_)) {
            *v = toml::Value::Array(vec![v.clone()]);
        }
    }
    RunConfig::deserialize(table).map_err(|e| Error::Config(e.message().to_string()))
}

/// Where a configuration came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigSource {
    Defaults,
    Toml(PathBuf),
    /// A manifest written by an earlier run of `command`.
    Manifest { path: PathBuf, command: String },
}

/// Loads `path` (TOML, or a manifest if it ends in `.json`) and applies the
/// overrides. Without a path the defaults are used.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<(RunConfig, ConfigSource)> {
    let Some(path) = path else {
        return Ok((build(toml::Table::new(), overrides)?, ConfigSource::Defaults));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: serde_json::Value = serde_json::from_str(&text)?;
        let command = manifest
            .get("command")
            .and_then(|c| c.as_str())
            .ok_or_else(|| Error::Config(format!("{}: manifest has no command", path.display())))?
            .to_string();
        let config = manifest
            .get("config")
            .cloned()
            .ok_or_else(|| Error::Config(format!("{}: manifest has no config", path.display())))?;
        let stored: RunConfig =
            serde_json::from_value(config).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let table = toml::Table::try_from(&stored).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = build(table, overrides)?;
        return Ok((
            cfg,
            ConfigSource::Manifest {
                path: path.to_path_buf(),
                command,
            },
        ));
    }
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    Ok((build(table, overrides)?, ConfigSource::Toml(path.to_path_buf())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_win_over_file() {
        let mut file = tempfile::NamedTempFile::with_suffix(".toml").unwrap();
        writeln!(file, "f = 50\nm = 2\nmode = \"scaling-law\"\nf_values = [10, 20.5]").unwrap();
        let ov = parse_overrides(&strings(&["--m", "3", "--n-trajectories=7"])).unwrap();
        let (cfg, src) = load(Some(file.path()), &ov).unwrap();
        assert_eq!(cfg.f, 50.0);
        assert_eq!(cfg.m, 3.0);
        assert_eq!(cfg.n_trajectories, 7);
        assert_eq!(cfg.mode, Mode::ScalingLaw);
        assert_eq!(cfg.f_values, vec![10.0, 20.5]);
        assert!(matches!(src, ConfigSource::Toml(_)));
    }

    #[test]
    fn list_override() {
        let ov = parse_overrides(&strings(&["--f_values", "20,40,60", "--sharing", "record"])).unwrap();
        let (cfg, _) = load(None, &ov).unwrap();
        assert_eq!(cfg.f_values, vec![20.0, 40.0, 60.0]);
        assert_eq!(cfg.sharing, NoiseSharing::Record);
        let (cfg, _) = load(None, &[("f_values".into(), "30".into())]).unwrap();
        assert_eq!(cfg.f_values, vec![30.0]);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(
            load(None, &[("bogus".into(), "1".into())]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            load(None, &[("mode".into(), "sideways".into())]),
            Err(Error::Config(_))
        ));
        assert!(parse_overrides(&strings(&["m", "1"])).is_err());
        assert!(parse_overrides(&strings(&["--m"])).is_err());
        assert!(matches!(
            load(Some(Path::new("/nonexistent/run.toml")), &[]),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = RunConfig {
            f: 12.5,
            input: Some("x.csv".into()),
            ..Default::default()
        };
        let manifest = serde_json::json!({ "command": "qfi", "config": cfg });
        let mut file = tempfile::NamedTempFile::with_suffix(".json").unwrap();
        write!(file, "{manifest}").unwrap();
        let (back, src) = load(Some(file.path()), &[]).unwrap();
        assert_eq!(back, cfg);
        assert!(matches!(src, ConfigSource::Manifest { command, .. } if command == "qfi"));
    }
}
