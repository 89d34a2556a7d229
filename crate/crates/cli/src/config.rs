//! Run configuration: the optional `--config` file merged with flags.

use std::path::Path;

use greenmachine::calibration::GbnmConfig;
use greenmachine::{NoiseConfig, NoisePreset};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A noise preset name or a fully explicit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSetting {
    Preset(NoisePreset),
    Explicit(NoiseConfig),
}

impl NoiseSetting {
    pub fn resolve(&self, seed: u64) -> Result<NoiseConfig, CliError> {
        let cfg = match self {
            NoiseSetting::Preset(p) => p.resolve(seed),
            NoiseSetting::Explicit(c) => c.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_stochastic(&self) -> bool {
        match self {
            NoiseSetting::Preset(p) => *p != NoisePreset::None,
            NoiseSetting::Explicit(c) => !c.is_noiseless(),
        }
    }
}

/// Contents of a `--config` file. Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub noise: Option<NoiseSetting>,
    pub gbnm: Option<GbnmConfig>,
    pub sweep_resolution: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Everything that determines a run's output, embedded in every file it writes.
#[derive(Debug, Serialize)]
pub struct Provenance<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: &'a C,
}

impl<C: Serialize> Clone for Provenance<'_, C> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<C: Serialize> Copy for Provenance<'_, C> {}

impl<'a, C: Serialize> Provenance<'a, C> {
    pub fn new(command: &'static str, seed: Option<u64>, config: &'a C) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
        }
    }
}
