//! Experiment harness: config file schema, policy bundles, file-based
//! pipeline stages and the paired A/B experiment runner.

mod oracle_checks;
mod policy;
mod stages;

pub use oracle_checks::{all_checks, CheckOutcome};
pub use policy::{PolicyBundle, PolicyScorer};
pub use stages::{
    calibration_tables, hitrate_table, read_jsonl, validation_from_sessions, write_jsonl,
    Pipeline, RerankDecision, TuneArtifact, BOOTSTRAP_ARM,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::labels::{LabelSpec, SdrSampleMode};
use crate::predictor::TrainConfig;
use crate::ranker::{EnsembleWeights, RankingConfig};
use crate::tuner::TuneSpec;
use crate::worldsim::WorldConfig;

pub const CONFIG_VERSION: u32 = 1;

/// The calibration config shipped with the crate, embedded so oracle checks
/// run against the exact population the measurement suite uses.
pub const CALIBRATION_CONFIG_TOML: &str = include_str!("../../configs/calibration.toml");

/// Simulation knobs that are not part of the request geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub sessions_per_user: u32,
    #[serde(default = "SimSection::default_same_category")]
    pub fpool_same_category: f64,
}

impl SimSection {
    fn default_same_category() -> f64 {
        0.7
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSection {
    pub beam_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Oracle,
    #[default]
    Trained,
    /// Deterministic pseudo-random ranking; used for exploration traffic.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RerankMode {
    #[default]
    Pointwise,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PersistSessions {
    #[default]
    First,
    All,
    None,
}

/// One named policy arm. Unset fields inherit the config-level defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    #[serde(default)]
    pub scorer: ScorerKind,
    #[serde(default)]
    pub rerank: RerankMode,
    #[serde(default)]
    pub lookahead: Option<bool>,
    #[serde(default)]
    pub lookahead_coefficient: Option<f64>,
    #[serde(default)]
    pub weights: Option<EnsembleWeights>,
    #[serde(default)]
    pub vtr_threshold_seconds: Option<f64>,
    #[serde(default)]
    pub sdr_mode: Option<SdrSampleMode>,
    #[serde(default)]
    pub sdr_conflict_filter: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub name: String,
    pub replicate_seeds: Vec<u64>,
    /// Days simulated per replicate; defaults to the world's day span.
    #[serde(default)]
    pub eval_days: Option<u32>,
    /// Seed for the exploration traffic that trains models and feeds tuning.
    #[serde(default = "ExperimentSection::default_bootstrap_seed")]
    pub bootstrap_seed: u64,
    #[serde(default = "ExperimentSection::default_bootstrap_days")]
    pub bootstrap_days: u32,
    #[serde(default)]
    pub bootstrap_policy: ScorerKind,
    /// Requests sampled by the rank/rerank decision stages.
    #[serde(default = "ExperimentSection::default_requests")]
    pub requests: usize,
    #[serde(default)]
    pub persist_sessions: PersistSessions,
    /// Arm pairs reported by the `report` stage, `[treatment, baseline]`.
    #[serde(default)]
    pub comparisons: Vec<[String; 2]>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl ExperimentSection {
    fn default_bootstrap_seed() -> u64 {
        0x9e3779b9
    }
    fn default_bootstrap_days() -> u32 {
        3
    }
    fn default_requests() -> usize {
        500
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub v: u32,
    pub world: WorldConfig,
    pub sim: SimSection,
    #[serde(default)]
    pub labels: LabelSpec,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub ranking: RankingConfig,
    pub beam: BeamSection,
    #[serde(default)]
    pub tune: Option<TuneSpec>,
    /// Default ensemble weights, overridable per arm.
    pub weights: EnsembleWeights,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub arms: BTreeMap<String, ArmConfig>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// The embedded calibration config.
    pub fn builtin_calibration() -> Self {
        Self::from_toml(CALIBRATION_CONFIG_TOML).expect("shipped calibration config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.v != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.v
            )));
        }
        self.world.validate()?;
        self.labels.validate()?;
        self.train.validate()?;
        self.ranking.validate()?;
        self.weights.validate()?;
        if let Some(tune) = &self.tune {
            tune.validate()?;
        }
        if self.beam.beam_width == 0 {
            return Err(Error::Config("beam.beam_width must be >= 1".into()));
        }
        if self.sim.sessions_per_user == 0 {
            return Err(Error::Config("sim.sessions_per_user must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sim.fpool_same_category) {
            return Err(Error::Config("sim.fpool_same_category out of [0,1]".into()));
        }
        if self.experiment.replicate_seeds.is_empty() {
            return Err(Error::Config("experiment.replicate_seeds must be non-empty".into()));
        }
        if self.experiment.requests == 0 {
            return Err(Error::Config("experiment.requests must be >= 1".into()));
        }
        if let Some(days) = self.experiment.eval_days {
            if days == 0 || days > self.world.day_count {
                return Err(Error::Config(format!(
                    "experiment.eval_days must be in 1..={}",
                    self.world.day_count
                )));
            }
        }
        for (name, arm) in &self.arms {
            if let Some(w) = &arm.weights {
                w.validate()?;
            }
            if let Some(t) = arm.vtr_threshold_seconds {
                if t <= 0.0 {
                    return Err(Error::Config("arm vtr threshold must be positive".into()));
                }
            }
            if arm.rerank == RerankMode::Beam && self.ranking.n > 64 {
                return Err(Error::Config(format!(
                    "arm `{name}` uses beam re-ranking; ranking.n must be <= 64"
                )));
            }
        }
        for [a, b] in &self.experiment.comparisons {
            for name in [a, b] {
                if !self.arms.contains_key(name) {
                    return Err(Error::Config(format!(
                        "comparison references undeclared arm `{name}`"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn arm(&self, name: &str) -> Result<&ArmConfig> {
        self.arms
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown arm `{name}`")))
    }

    /// The arm's label spec with overrides applied.
    pub fn arm_label_spec(&self, arm: &ArmConfig) -> LabelSpec {
        LabelSpec {
            vtr_threshold_seconds: arm
                .vtr_threshold_seconds
                .unwrap_or(self.labels.vtr_threshold_seconds),
            sdr_mode: arm.sdr_mode.unwrap_or(self.labels.sdr_mode),
            sdr_conflict_filter: arm
                .sdr_conflict_filter
                .unwrap_or(self.labels.sdr_conflict_filter),
        }
    }

    /// The arm's ranking config with look-ahead overrides applied.
    pub fn arm_ranking(&self, arm: &ArmConfig) -> RankingConfig {
        RankingConfig {
            lookahead_enabled: arm.lookahead.unwrap_or(self.ranking.lookahead_enabled),
            lookahead_coefficient: arm
                .lookahead_coefficient
                .unwrap_or(self.ranking.lookahead_coefficient),
            ..self.ranking
        }
    }

    pub fn arm_weights(&self, arm: &ArmConfig) -> EnsembleWeights {
        arm.weights.unwrap_or(self.weights)
    }
}
