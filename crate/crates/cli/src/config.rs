//! Experiment configuration: one TOML document, flags on top, always
//! written back fully resolved next to the outputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use duplex_agent::{NetworkSpec, SacConfig, TrainConfig};
use duplex_core::data::CsvSchema;
use duplex_core::env::{AccountingMode, EnvConfig, RewardKind};
use duplex_core::metrics::{DEFAULT_ANNUALIZATION, DEFAULT_BINS};
use duplex_core::preprocess::NoiseSpec;
use duplex_core::sppo::{RiskMeasure, SppoConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    EqualWeight,
    Sppo(RiskMeasure),
    Rl(RewardKind),
}

impl Strategy {
    /// Row label in comparison tables.
    pub fn label(&self, sppo: &SppoConfig) -> String {
        match self {
            Strategy::EqualWeight => "Market".into(),
            Strategy::Sppo(RiskMeasure::Cvar) => format!("CVaR({}%)", (sppo.alpha * 100.0).round()),
            Strategy::Sppo(m) => m.label().into(),
            Strategy::Rl(RewardKind::Pnl) => "RL-PnL".into(),
            Strategy::Rl(RewardKind::Return) => "RL-Return".into(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::EqualWeight => write!(f, "equal_weight"),
            Strategy::Sppo(m) => write!(f, "sppo:{}", m.label()),
            Strategy::Rl(RewardKind::Pnl) => write!(f, "rl:pnl"),
            Strategy::Rl(RewardKind::Return) => write!(f, "rl:return"),
        }
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "equal_weight" | "market" => Strategy::EqualWeight,
            "sppo:mv" => Strategy::Sppo(RiskMeasure::Mv),
            "sppo:mad" => Strategy::Sppo(RiskMeasure::Mad),
            "sppo:cvar" => Strategy::Sppo(RiskMeasure::Cvar),
            "rl:pnl" => Strategy::Rl(RewardKind::Pnl),
            "rl:return" => Strategy::Rl(RewardKind::Return),
            _ => {
                return Err(format!(
                    "unknown strategy `{s}` (expected equal_weight, sppo:MV|MAD|CVaR or rl:pnl|return)"
                ))
            }
        })
    }
}

impl TryFrom<String> for Strategy {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// One candle file per asset.
    pub paths: Vec<PathBuf>,
    pub schema: CsvSchema,
    /// Rebalancing interval.
    pub interval_hours: u32,
    pub train_steps: usize,
    pub test_steps: usize,
    /// Forward-fill missing source candles instead of failing.
    pub fill_gaps: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            paths: Vec::new(),
            schema: CsvSchema::default(),
            interval_hours: 4,
            train_steps: 2178,
            test_steps: 732,
            fill_gaps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    #[serde(flatten)]
    pub budget: TrainConfig,
    /// Random fixed-length episodes inside the train slice; whole slice when absent.
    pub episode_len: Option<usize>,
    pub noise: NoiseSpec,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            budget: TrainConfig::default(),
            episode_len: None,
            noise: NoiseSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSettings {
    pub annualization_factor: f64,
    pub bins: usize,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        MetricsSettings {
            annualization_factor: DEFAULT_ANNUALIZATION,
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub strategy: Strategy,
    /// Trained agent used by the `rl:*` strategies.
    pub checkpoint: Option<PathBuf>,
    pub data: DataConfig,
    pub env: EnvConfig,
    pub sppo: SppoConfig,
    pub network: NetworkSpec,
    pub sac: SacConfig,
    pub train: TrainSettings,
    pub metrics: MetricsSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out: PathBuf::from("runs"),
            strategy: Strategy::Rl(RewardKind::Pnl),
            checkpoint: None,
            data: DataConfig::default(),
            env: EnvConfig::default(),
            sppo: SppoConfig::default(),
            network: NetworkSpec::desk(1, EnvConfig::default().history),
            sac: SacConfig::default(),
            train: TrainSettings::default(),
            metrics: MetricsSettings::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<AccountingMode>,
    pub strategy: Option<Strategy>,
    pub checkpoint: Option<PathBuf>,
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Parses a config document. Relative paths inside it are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.data.paths = cfg.data.paths.iter().map(|p| rebase(base, p)).collect();
        cfg.checkpoint = cfg.checkpoint.map(|p| rebase(base, &p));
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base).map_err(|e| e.context(path.display()))
    }

    /// File (or defaults) plus overrides.
    pub fn build(path: Option<&Path>, over: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = over.seed {
            cfg.seed = s;
        }
        if let Some(o) = &over.out {
            cfg.out = o.clone();
        }
        if let Some(m) = over.mode {
            cfg.env.accounting_mode = m;
        }
        if let Some(s) = over.strategy {
            cfg.strategy = s;
        }
        if let Some(c) = &over.checkpoint {
            cfg.checkpoint = Some(c.clone());
        }
        cfg.harmonize();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills fields that follow from others.
    pub fn harmonize(&mut self) {
        self.env.interval_hours = self.data.interval_hours as f64;
        self.network.history = self.env.history;
        if let Strategy::Rl(kind) = self.strategy {
            self.env.reward = kind;
        }
        if let Strategy::Sppo(m) = self.strategy {
            self.sppo.measure = m;
        }
        self.train.noise.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.interval_hours == 0 {
            return Err(CliError::Config("data.interval_hours must be >= 1".into()));
        }
        if self.metrics.annualization_factor <= 0.0 {
            return Err(CliError::Config("metrics.annualization_factor must be > 0".into()));
        }
        if self.train.noise.scale < 0.0 {
            return Err(CliError::Config("train.noise.scale must be >= 0".into()));
        }
        self.env.validate()?;
        self.sppo.validate()?;
        self.sac.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn persist(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(RESOLVED_CONFIG), self.to_toml())
            .map_err(|e| CliError::Runtime(format!("cannot write resolved config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_tables() {
        let c = ExperimentConfig::default();
        assert_eq!(c.data.interval_hours, 4);
        assert_eq!((c.data.train_steps, c.data.test_steps), (2178, 732));
        assert_eq!(c.env.history, 49);
        assert_eq!(c.env.fee, 0.0005);
        assert_eq!(c.env.penalty, 25.0);
        assert_eq!(c.sac.batch_size, 16);
        assert_eq!(c.sppo.risk_aversion, 4.0);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = ExperimentConfig::default();
        c.train.budget.max_updates = Some(5);
        c.strategy = Strategy::Sppo(RiskMeasure::Cvar);
        c.harmonize();
        let back = ExperimentConfig::parse(&c.to_toml(), Path::new("/")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn strategy_names_parse() {
        for s in ["equal_weight", "sppo:MV", "sppo:MAD", "sppo:CVaR", "rl:pnl", "rl:return"] {
            let parsed: Strategy = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert!("sppo:foo".parse::<Strategy>().is_err());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = ExperimentConfig::parse("sed = 3", Path::new(".")).unwrap_err();
        assert_eq!(e.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn overrides_win() {
        let over = Overrides {
            seed: Some(11),
            mode: Some(AccountingMode::Paper),
            strategy: Some(Strategy::Rl(RewardKind::Return)),
            ..Default::default()
        };
        let c = ExperimentConfig::build(None, &over).unwrap();
        assert_eq!(c.seed, 11);
        assert_eq!(c.env.accounting_mode, AccountingMode::Paper);
        assert_eq!(c.env.reward, RewardKind::Return);
    }
}
