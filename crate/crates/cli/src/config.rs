//! Run configuration: a sectioned TOML file plus `section.key=value` overrides.

use std::path::{Path, PathBuf};

use ruin_core::montecarlo::SimulationConfig;
use ruin_core::{ClaimDistribution, ModelParams, QuadratureSpec, RuinError, TabulatedDensity};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub claims: ClaimsConfig,
    pub quadrature: QuadratureSpec,
    pub simulation: SimulationConfig,
    pub output: OutputConfig,
}

/// Surplus process parameters; defaults are the desk model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub u: f64,
    pub c: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { u: 1.0, c: 2.0, lambda: 1.0, sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClaimsConfig {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    /// Two-column CSV `(x, p(x))` on a uniform grid; relative paths resolve against the config file.
    Tabulated { path: PathBuf },
}

impl Default for ClaimsConfig {
    fn default() -> Self {
        Self::Exponential { rate: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    /// Destination file; standard output when absent.
    pub path: Option<PathBuf>,
    /// Significant digits of numeric output.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { format: Format::Csv, path: None, precision: 17 }
    }
}

/// A loaded configuration with the text it came from, for locating keys in messages.
pub struct Loaded {
    pub config: RunConfig,
    source: Option<(PathBuf, String)>,
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Loaded, CliError> {
    let source = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            Some((p.to_path_buf(), text))
        }
        None => None,
    };
    let text = source.as_ref().map_or("", |(_, t)| t.as_str());
    let name = source.as_ref().map_or_else(|| "<defaults>".to_string(), |(p, _)| p.display().to_string());
    let mut config: RunConfig = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{name}: {e}")))?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Config(format!("{name} with --set overrides: {e}")))?
    };
    if let ClaimsConfig::Tabulated { path: table } = &mut config.claims {
        if table.is_relative() {
            if let Some(dir) = source.as_ref().and_then(|(p, _)| p.parent()) {
                *table = dir.join(&*table);
            }
        }
    }
    Ok(Loaded { config, source })
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set `{item}`: expected section.key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set `{item}`: empty key segment")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut cursor = table;
    for s in sections {
        cursor = cursor
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set `{item}`: `{s}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Everything a command needs, validated.
pub struct Resolved {
    pub config: RunConfig,
    pub model: ModelParams,
}

impl Loaded {
    /// 1-based line of `key` inside `[section]` of the config file, if it is written there.
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let (_, text) = self.source.as_ref()?;
        let mut current = String::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('[') {
                current = rest.trim_end_matches(']').trim().to_string();
            } else if current == section {
                if let Some((k, _)) = line.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn bad(&self, section: &str, key: &str, reason: impl std::fmt::Display) -> CliError {
        let at = match self.line_of(section, key) {
            Some(line) => format!(" (line {line})"),
            None => String::new(),
        };
        CliError::Config(format!("`{section}.{key}`{at}: {reason}"))
    }

    fn core_error(&self, section: &str, e: RuinError) -> CliError {
        match e {
            RuinError::InvalidParameter { name, reason } => self.bad(section, name, reason),
            RuinError::NetProfitViolation { c, loading } => {
                self.bad("model", "c", format!("net profit condition needs c > lambda * E[X] = {loading}, got {c}"))
            }
            other => CliError::Config(format!("`{section}`: {other}")),
        }
    }

    pub fn resolve(self) -> Result<Resolved, CliError> {
        let claims = match &self.config.claims {
            ClaimsConfig::Exponential { rate } => ClaimDistribution::exponential(*rate),
            ClaimsConfig::Erlang { shape, rate } => ClaimDistribution::erlang(*shape, *rate),
            ClaimsConfig::HyperExponential { weights, rates } => {
                ClaimDistribution::hyper_exponential(weights.clone(), rates.clone())
            }
            ClaimsConfig::Tabulated { path } => {
                if !path.is_file() {
                    return Err(self.bad("claims", "path", format!("file {} does not exist", path.display())));
                }
                TabulatedDensity::from_csv_path(path).map(ClaimDistribution::tabulated)
            }
        }
        .map_err(|e| self.core_error("claims", e))?;
        let m = &self.config.model;
        let model = ModelParams::new(m.u, m.c, m.lambda, m.sigma, claims).map_err(|e| self.core_error("model", e))?;
        self.config.quadrature.validate().map_err(|e| self.core_error("quadrature", e))?;
        self.config.simulation.validate().map_err(|e| self.core_error("simulation", e))?;
        if !(1..=17).contains(&self.config.output.precision) {
            return Err(self.bad("output", "precision", format!("must lie in 1..=17, got {}", self.config.output.precision)));
        }
        Ok(Resolved { config: self.config, model })
    }
}
