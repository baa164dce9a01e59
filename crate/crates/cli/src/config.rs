use std::fs;
use std::path::{Path, PathBuf};

use maskcomp::codecs::{CodecConfig, CodecKind};
use maskcomp::slsim::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything a run needs; each subcommand reads the sections it uses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Base seed; overrides `train.seed` when given.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub train: SimConfig,
    /// `train` reports the first round whose loss is at or below this.
    #[serde(default)]
    pub target_loss: Option<f64>,
    /// Codec used by `encode`.
    #[serde(default)]
    pub codec: Option<CodecConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Feature maps are `[channels, width]`, so `d = channels · width`.
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    /// Number of seeded feature maps per row.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Target compression rates; every codec in `codecs` is tuned to each.
    #[serde(default)]
    pub rates: Vec<f64>,
    #[serde(default = "default_codecs")]
    pub codecs: Vec<CodecKind>,
    /// MS mask width for rate-targeted rows; by default the widest mask
    /// that still leaves room for top values.
    #[serde(default)]
    pub ms_mask_bits: Option<u8>,
    /// Largest accepted gap between a target rate and the rate achieved.
    #[serde(default = "default_tolerance")]
    pub rate_tolerance: f64,
    /// Explicit codec settings, swept in addition to `rates`.
    #[serde(default)]
    pub cells: Vec<CodecConfig>,
}

fn default_channels() -> usize {
    64
}

fn default_width() -> usize {
    64
}

fn default_samples() -> usize {
    30
}

fn default_codecs() -> Vec<CodecKind> {
    CodecKind::ALL.to_vec()
}

fn default_tolerance() -> f64 {
    1e-3
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            channels: default_channels(),
            width: default_width(),
            samples: default_samples(),
            rates: Vec::new(),
            codecs: default_codecs(),
            ms_mask_bits: None,
            rate_tolerance: default_tolerance(),
            cells: Vec::new(),
        }
    }
}

pub const DEFAULT_OUT: &str = "msc-out";

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Applies command-line overrides; the seed propagates to the simulator.
    pub fn resolve(mut self, out: Option<PathBuf>, seed: Option<u64>, samples: Option<usize>) -> Self {
        if out.is_some() {
            self.out = out;
        }
        if self.out.is_none() {
            self.out = Some(PathBuf::from(DEFAULT_OUT));
        }
        if seed.is_some() {
            self.seed = seed;
        }
        let seed = *self.seed.get_or_insert(0);
        self.train.seed = seed;
        if let Some(n) = samples {
            self.sweep.samples = n;
        }
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    /// Writes the resolved configuration as `<out>/<name>.resolved.toml`.
    pub fn write_resolved(&self, name: &str) -> CliResult<PathBuf> {
        let dir = self.out_dir();
        fs::create_dir_all(&dir).map_err(|e| CliError::io("create", &dir, e))?;
        let path = dir.join(format!("{name}.resolved.toml"));
        fs::write(&path, self.to_toml()?).map_err(|e| CliError::io("write", &path, e))?;
        Ok(path)
    }
}
