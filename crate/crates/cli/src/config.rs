//! Scenario files.
//!
//! A scenario is a TOML document with `schema_version = 1`, a `mode`, the
//! parameters for that mode and optional per-command sections. Unknown keys
//! are rejected everywhere.

use std::path::Path;

use aoi_core::queue_sim::Preemption;
use aoi_core::repeated_sim::{DeviationRate, Detection, Monitoring};
use aoi_core::{BayesianSpec, Strategy, StrategyKind, SystemParams};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20_200_701;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Complete,
    Bayesian,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub params: Option<ParamsConfig>,
    pub spec: Option<SpecConfig>,
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub delta: GridConfig,
    pub ratio: Option<RatioConfig>,
    pub simulate: Option<SimulateConfig>,
    pub queue: Option<QueueConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub mu: f64,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub c_high: f64,
    pub c_low: f64,
    pub p_high: f64,
    pub incumbent_costs: Vec<f64>,
    pub mu: f64,
}

/// Platform 0 with a two-point cost and `n − 1` identical incumbents, for each `n` in `sizes`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub c_high: f64,
    pub c_low: f64,
    pub p_high: f64,
    pub incumbent_cost: f64,
    pub mu: f64,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { start: 0.0, stop: 0.99, points: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Delta,
    Mu,
    N,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioConfig {
    pub sweep: Sweep,
    /// Bandwidths for a `mu` sweep.
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismChoice {
    #[default]
    Cooperation,
    PerRealizationOptimum,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub rounds: u64,
    pub delta: f64,
    #[serde(default)]
    pub mechanism: MechanismChoice,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub monitoring: MonitoringConfig,
    #[serde(default)]
    pub strategies: Vec<StrategyConfig>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionConfig {
    #[default]
    TwoSided,
    UpwardOnly,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonitoringConfig {
    Analytic { tol: f64 },
    Noisy { events_per_round: u64, band: f64 },
}

impl Default for MonitoringConfig {
    fn default() -> Self {
        MonitoringConfig::Analytic { tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Comply,
    OneShotDeviate,
    BayesianCheat,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub platform: usize,
    pub kind: StrategyName,
    pub round: Option<u64>,
    /// Explicit deviation rate; the best response when absent.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueConfig {
    pub events: Option<u64>,
    pub time: Option<f64>,
    #[serde(default)]
    pub preemption: PreemptionConfig,
    #[serde(default)]
    pub cases: Vec<QueueCase>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreemptionConfig {
    #[default]
    Global,
    WithinSource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueCase {
    pub rates: Vec<f64>,
    pub mu: f64,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        match cfg.mode {
            Mode::Complete if cfg.params.is_none() => {
                return Err(CliError::Config("mode = \"complete\" needs a [params] table".into()))
            }
            Mode::Bayesian if cfg.spec.is_none() && cfg.family.is_none() => {
                return Err(CliError::Config("mode = \"bayesian\" needs a [spec] or [family] table".into()))
            }
            _ => {}
        }
        if cfg.delta.points == 0 || !(cfg.delta.start <= cfg.delta.stop) {
            return Err(CliError::Config("[delta] needs points >= 1 and start <= stop".into()));
        }
        Ok(cfg)
    }

    pub fn system_params(&self) -> Result<SystemParams, CliError> {
        let p = self
            .params
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [params] table".into()))?;
        Ok(SystemParams::new(p.mu, p.costs.clone())?)
    }

    pub fn bayesian_spec(&self) -> Result<BayesianSpec, CliError> {
        let s = self
            .spec
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [spec] table".into()))?;
        Ok(BayesianSpec::new(s.c_high, s.c_low, s.p_high, s.incumbent_costs.clone(), s.mu)?)
    }

    pub fn delta_grid(&self) -> Vec<f64> {
        aoi_core::mech_complete::linspace(self.delta.start, self.delta.stop, self.delta.points)
    }
}

impl DetectionConfig {
    pub fn to_core(self) -> Detection {
        match self {
            DetectionConfig::TwoSided => Detection::TwoSided,
            DetectionConfig::UpwardOnly => Detection::UpwardOnly,
        }
    }
}

impl MonitoringConfig {
    pub fn to_core(&self) -> Monitoring {
        match *self {
            MonitoringConfig::Analytic { tol } => Monitoring::Analytic { tol },
            MonitoringConfig::Noisy { events_per_round, band } => Monitoring::Noisy { events_per_round, band },
        }
    }
}

impl PreemptionConfig {
    pub fn to_core(self) -> Preemption {
        match self {
            PreemptionConfig::Global => Preemption::Global,
            PreemptionConfig::WithinSource => Preemption::WithinSource,
        }
    }
}

impl StrategyConfig {
    pub fn to_core(&self) -> Result<Strategy, CliError> {
        let kind = match self.kind {
            StrategyName::Comply => StrategyKind::Comply,
            StrategyName::BayesianCheat => StrategyKind::BayesianCheat,
            StrategyName::OneShotDeviate => StrategyKind::OneShotDeviate {
                round: self
                    .round
                    .ok_or_else(|| CliError::Config("one_shot_deviate needs `round`".into()))?,
                rate: self.rate.map_or(DeviationRate::BestResponse, DeviationRate::Explicit),
            },
        };
        Ok(Strategy { platform: self.platform, kind })
    }
}
