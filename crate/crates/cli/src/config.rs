//! Experiment files: TOML with top-level scalars plus `[model]`, `[train]`
//! and `[test]` tables. Missing keys fall back to the beam defaults.

use std::fs;
use std::path::{Path, PathBuf};

use contact_rom::experiment::{ExperimentConfig, ModelSource};
use contact_rom::CouplingMethod;

use crate::error::CliError;

pub const RESOLVED_NAME: &str = "config.resolved";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

/// Reads `path`, applies command-line overrides and checks that every
/// referenced file exists. Relative model paths are taken relative to the
/// config file.
pub fn load(
    path: &Path,
    out: Option<&Path>,
    coupling: Option<CouplingMethod>,
    seed: Option<u64>,
) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let file_out = match table.remove("out") {
        Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(CliError::config("`out` must be a string")),
        None => None,
    };
    let file_seed = match table.remove("seed") {
        Some(toml::Value::Integer(i)) if i >= 0 => Some(i as u64),
        Some(_) => return Err(CliError::config("`seed` must be a nonnegative integer")),
        None => None,
    };
    let mut experiment: ExperimentConfig = table
        .try_into()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;

    let base = path.parent().unwrap_or(Path::new("."));
    if let ModelSource::Files {
        mass,
        stiffness,
        constraints,
        offsets,
        partition,
    } = &mut experiment.model
    {
        for p in [mass, stiffness, constraints, offsets, partition] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.is_file() {
                return Err(CliError::missing_file(p));
            }
        }
    }
    if let Some(c) = coupling {
        experiment.coupling = c;
    }
    experiment.validate().map_err(|e| CliError::config(e.to_string()))?;

    let out = out
        .map(Path::to_path_buf)
        .or_else(|| file_out.map(|o| if o.is_relative() { base.join(o) } else { o }))
        .ok_or_else(|| CliError::config("no output directory: pass --out or set `out` in the config"))?;
    Ok(RunConfig {
        experiment,
        out,
        seed: seed.or(file_seed),
    })
}

/// TOML echo of the resolved configuration; reading it back reproduces the run.
pub fn resolved_text(config: &RunConfig) -> Result<String, CliError> {
    let mut table = toml::Table::try_from(&config.experiment)
        .map_err(|e| CliError::config(format!("cannot serialize config: {e}")))?;
    table.insert("out".into(), toml::Value::String(config.out.display().to_string()));
    if let Some(s) = config.seed {
        table.insert("seed".into(), toml::Value::Integer(s as i64));
    }
    toml::to_string(&table).map_err(|e| CliError::config(format!("cannot serialize config: {e}")))
}

pub fn write_resolved(config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&config.out).map_err(|e| CliError::io(&config.out, e))?;
    let path = config.out.join(RESOLVED_NAME);
    fs::write(&path, resolved_text(config)?).map_err(|e| CliError::io(&path, e))
}
