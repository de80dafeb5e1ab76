//! TOML-backed experiment configuration. Every field has a default so a
//! minimal config only names the data file and the split; all defaults are
//! echoed into the run outputs for provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::ReturnConvention;
use crate::market::DataSplit;
use crate::selection::{RpsParams, SaSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub split: SplitConfig,
    pub strategies: Vec<StrategyConfig>,
    pub weighters: Vec<WeighterConfig>,
    /// Portfolios kept per (strategy, weighter) cell after ranking.
    pub top_k: usize,
    pub risk_free_rate: f64,
    /// Strategy replication seeds; subsets from all seeds are pooled per
    /// cell. Stability checks use the first seed.
    pub seeds: Vec<u64>,
    pub return_convention: ReturnConvention,
    pub stability: StabilityConfig,
    pub output: OutputConfig,
    /// Random-strategy draws per seed.
    pub rnd_repeats: usize,
    /// Simulated-annealing restarts per seed.
    pub sa_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            split: SplitConfig::default(),
            strategies: vec![StrategyConfig::Rps(RpsParams::default())],
            weighters: vec![WeighterConfig::Mvo { objective: ObjectivePick::MaxSharpe }],
            top_k: 10,
            risk_free_rate: 0.0,
            seeds: vec![0],
            return_convention: ReturnConvention::Compound,
            stability: StabilityConfig::default(),
            output: OutputConfig::default(),
            rnd_repeats: 100,
            sa_repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: String,
    /// Single-character field delimiter.
    pub delimiter: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { path: String::new(), delimiter: ",".to_string() }
    }
}

impl DataConfig {
    pub fn delimiter_byte(&self) -> Result<u8> {
        let bytes = self.delimiter.as_bytes();
        if bytes.len() != 1 {
            return Err(Error::Config(format!(
                "delimiter {:?} must be a single byte",
                self.delimiter
            )));
        }
        Ok(bytes[0])
    }
}

/// Price-row index ranges, half-open.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: [usize; 2],
    pub test: [usize; 2],
}

impl SplitConfig {
    pub fn to_split(&self, horizon: usize) -> Result<DataSplit> {
        DataSplit::new(self.train[0]..self.train[1], self.test[0]..self.test[1], horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum StrategyConfig {
    Rps(RpsParams),
    Mantegna,
    Random(RandomParams),
    Sa(SaParams),
}

impl StrategyConfig {
    pub fn tag(&self) -> &'static str {
        match self {
            StrategyConfig::Rps(_) => "rps",
            StrategyConfig::Mantegna => "mantegna",
            StrategyConfig::Random(_) => "random",
            StrategyConfig::Sa(_) => "sa",
        }
    }

    /// Table label, matching the published method names.
    pub fn label(&self) -> &'static str {
        match self {
            StrategyConfig::Rps(_) => "RPS",
            StrategyConfig::Mantegna => "MTN",
            StrategyConfig::Random(_) => "RND",
            StrategyConfig::Sa(_) => "SA",
        }
    }

    /// One-phased strategies carry their own weights and skip the weighter
    /// stage.
    pub fn is_one_phased(&self) -> bool {
        matches!(self, StrategyConfig::Sa(_))
    }

    /// Stability is defined only for strategies driven by the correlation
    /// structure; random draws and annealing restarts have no notion of a
    /// perturbed rerun with "the same" randomness.
    pub fn supports_stability(&self) -> bool {
        matches!(self, StrategyConfig::Rps(_) | StrategyConfig::Mantegna)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomParams {
    pub subset_size: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self { subset_size: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub subset_size: usize,
    pub schedule: SaSchedule,
}

impl Default for SaParams {
    fn default() -> Self {
        Self { subset_size: 5, schedule: SaSchedule::default() }
    }
}

/// Which frontier point (or MVO objective) a weighter reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectivePick {
    #[default]
    MaxSharpe,
    MinVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum WeighterConfig {
    Mvo {
        #[serde(default)]
        objective: ObjectivePick,
    },
    Hrp,
    Cla {
        #[serde(default)]
        pick: ObjectivePick,
    },
}

impl WeighterConfig {
    pub fn tag(&self) -> &'static str {
        match self {
            WeighterConfig::Mvo { .. } => "mvo",
            WeighterConfig::Hrp => "hrp",
            WeighterConfig::Cla { .. } => "cla",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WeighterConfig::Mvo { .. } => "MVO",
            WeighterConfig::Hrp => "HRP",
            WeighterConfig::Cla { .. } => "CLA",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub enabled: bool,
    /// Gaussian noise applied to correlations for the noise test.
    pub sigma: f64,
    /// Train-window shift, in price rows, for the time test.
    pub offset: i64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { enabled: true, sigma: 0.01, offset: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub dump_graph: bool,
    pub dump_corpus: bool,
    pub dump_embedding: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".to_string(),
            dump_graph: false,
            dump_corpus: false,
            dump_embedding: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        if self.weighters.is_empty() {
            return Err(Error::Config("at least one weighter is required".into()));
        }
        if self.top_k < 1 {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.rnd_repeats < 1 || self.sa_repeats < 1 {
            return Err(Error::Config("repeat counts must be >= 1".into()));
        }
        if !self.risk_free_rate.is_finite() {
            return Err(Error::Config("risk_free_rate must be finite".into()));
        }
        if !self.stability.sigma.is_finite() || self.stability.sigma < 0.0 {
            return Err(Error::Config("stability.sigma must be >= 0".into()));
        }
        self.data.delimiter_byte()?;
        for ranges in [&self.split.train, &self.split.test] {
            if ranges[0] >= ranges[1] {
                return Err(Error::Config(format!(
                    "split range [{}, {}) is empty or reversed",
                    ranges[0], ranges[1]
                )));
            }
        }
        Ok(())
    }
}
