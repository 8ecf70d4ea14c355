//! TOML run configuration and `key=value` overrides.

use std::path::{Path, PathBuf};

use coopmud::harness::{RunOptions, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// A sweep plus where and how to run it.
///
/// ```toml
/// name = "power"
/// workers = 4
///
/// [sweep]
/// parameter = "tx-power-db"
/// grid = [10.0, 12.0, 14.0]
/// detectors = [{ kind = "optimal" }]
/// stopping = { min_errors = 200, max_bits = 1000000 }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output subdirectory name.
    #[serde(default = "default_name")]
    pub name: String,
    /// Root output directory; defaults to `$COOPMUD_OUT_DIR`, then
    /// `coopmud-out`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; does not affect results.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Frames per batch; results depend on it.
    #[serde(default = "default_batch")]
    pub batch_frames: u64,
    pub sweep: SweepSpec,
}

fn default_name() -> String {
    "sweep".into()
}

fn default_batch() -> u64 {
    RunOptions::default().batch_frames
}

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "COOPMUD_OUT_DIR";

impl RunConfig {
    pub fn new(name: &str, sweep: SweepSpec) -> Self {
        Self {
            name: name.into(),
            output_dir: None,
            workers: None,
            batch_frames: default_batch(),
            sweep,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        let mut o = RunOptions {
            batch_frames: self.batch_frames,
            ..RunOptions::default()
        };
        if let Some(w) = self.workers {
            o.workers = w;
        }
        o
    }

    /// `--out`, then the config, then the environment, then `coopmud-out`.
    pub fn output_root(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("coopmud-out"))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(CliError::Config(format!(
                "name `{}` must be a plain directory name",
                self.name
            )));
        }
        if self.workers == Some(0) || self.batch_frames == 0 {
            return Err(CliError::Config(
                "workers and batch_frames must be positive".into(),
            ));
        }
        self.sweep.validate()?;
        Ok(())
    }

    /// Parses a TOML document, applies overrides, and validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> CliResult<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        apply_overrides(&mut doc, overrides)?;
        let cfg: Self = doc
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Round-trips through TOML so overrides apply to presets too.
    pub fn with_overrides(&self, overrides: &[String]) -> CliResult<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        Self::from_toml(&self.to_toml(), overrides)
    }
}

/// Applies `a.b.c=value` overrides. Values are parsed as TOML and fall back
/// to plain strings.
pub fn apply_overrides(doc: &mut toml::Table, overrides: &[String]) -> CliResult<()> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not key=value")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::Config(format!("override `{o}` has an empty key")));
        }
        let value = format!("v = {}", raw.trim())
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        let mut table = &mut *doc;
        for p in &parts[..parts.len() - 1] {
            let entry = table
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry.as_table_mut().ok_or_else(|| {
                CliError::Config(format!("override `{key}`: `{p}` is not a table"))
            })?;
        }
        table.insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(())
}
