//! Experiment configuration files.
//!
//! One TOML file drives a whole experiment: the synthetic user, every
//! scoring and baseline knob, the model hyperparameters, the train/test
//! split and the attack roster. Every section and key is optional — the
//! defaults are the shipped reference values — so a minimal file can be
//! empty and a typical one overrides a handful of keys.

use serde::{Deserialize, Serialize};

use super::{AttackMode, AttackSpec};
use crate::anfis::train::TrainParams;
use crate::events::{SyntheticProfile, Timestamp};
use crate::pipeline::{Mode, PipelineConfig};
use crate::ranklist::RankParams;
use crate::scoring::FeatureScorerConfig;
use crate::{Error, Result};

/// Baseline (reference score) schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub prep_len_days: f64,
    pub block_size: u32,
    pub ewma_alpha: f64,
}

impl Default for ReferenceSection {
    fn default() -> ReferenceSection {
        ReferenceSection {
            prep_len_days: 7.0,
            block_size: 7,
            ewma_alpha: 0.2,
        }
    }
}

/// Model shape and training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnfisSection {
    pub mfs_per_input: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub tol: f64,
}

impl Default for AnfisSection {
    fn default() -> AnfisSection {
        let train = TrainParams::default();
        AnfisSection {
            mfs_per_input: 2,
            learning_rate: train.learning_rate,
            epochs: train.epochs,
            tol: train.tol,
        }
    }
}

impl AnfisSection {
    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            tol: self.tol,
        }
    }
}

/// Window cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    /// Seconds between forced authentications while the screen stays on;
    /// 0 disables the timer so windows are whole screen sessions.
    pub timer_period: u64,
}

impl Default for PipelineSection {
    fn default() -> PipelineSection {
        PipelineSection { timer_period: 300 }
    }
}

/// One attack entry in the config file. Times are in days from the start of
/// the trace, fractional values allowed, because that is how the rest of the
/// file (preparation length, split point) speaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackEntry {
    pub mode: AttackMode,
    pub start_day: f64,
    #[serde(default = "default_attack_duration")]
    pub duration_hours: f64,
    #[serde(default = "default_attack_intensity")]
    pub intensity_per_hour: f64,
    #[serde(default = "default_knowledge_k")]
    pub knowledge_k: usize,
    pub seed: u64,
}

fn default_attack_duration() -> f64 {
    3.0
}

fn default_attack_intensity() -> f64 {
    20.0
}

fn default_knowledge_k() -> usize {
    5
}

impl AttackEntry {
    pub fn to_spec(self) -> AttackSpec {
        AttackSpec {
            mode: self.mode,
            start: (self.start_day * 86_400.0).round() as Timestamp,
            duration_hours: self.duration_hours,
            intensity_per_hour: self.intensity_per_hour,
            knowledge_k: self.knowledge_k,
            seed: self.seed,
        }
    }
}

/// Train/test split and attack roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSection {
    /// Training uses windows up to the end of this day; evaluation uses the
    /// rest of the trace.
    pub split_day: u32,
    /// Attacks grafted into the training portion (informed entries feed the
    /// suspicious class, uninformed ones the adversary class).
    pub train_attacks: Vec<AttackEntry>,
    /// Fresh attacks evaluated against the trained model.
    pub test_attacks: Vec<AttackEntry>,
}

impl Default for HarnessSection {
    fn default() -> HarnessSection {
        HarnessSection {
            split_day: 21,
            train_attacks: Vec::new(),
            test_attacks: Vec::new(),
        }
    }
}

/// A full experiment description, one section per subsystem.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub events: SyntheticProfile,
    pub ranklist: RankParams,
    pub scoring: FeatureScorerConfig,
    pub reference: ReferenceSection,
    pub anfis: AnfisSection,
    pub pipeline: PipelineSection,
    pub harness: HarnessSection,
}

impl ExperimentConfig {
    /// Parse a TOML document; unknown sections or keys are rejected so a
    /// typo'd override cannot silently fall back to a default.
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.events.validate()?;
        self.to_pipeline(Mode::Training).validate()?;
        if self.anfis.mfs_per_input < 2 {
            return Err(Error::Config(
                "anfis.mfs_per_input must be at least 2".into(),
            ));
        }
        if self.harness.split_day as f64 <= self.reference.prep_len_days {
            return Err(Error::Config(
                "harness.split_day must leave room after the preparation period".into(),
            ));
        }
        if u64::from(self.harness.split_day) * 86_400 > self.trace_end() {
            return Err(Error::Config(
                "harness.split_day lies beyond the trace".into(),
            ));
        }
        for attack in self
            .harness
            .train_attacks
            .iter()
            .chain(&self.harness.test_attacks)
        {
            attack.to_spec().validate()?;
        }
        for attack in &self.harness.train_attacks {
            if attack.start_day <= self.reference.prep_len_days
                || attack.to_spec().end() > self.split_time()
            {
                return Err(Error::Config(format!(
                    "training attack at day {} must fit between preparation and the split",
                    attack.start_day
                )));
            }
        }
        for attack in &self.harness.test_attacks {
            if attack.to_spec().start < self.split_time()
                || attack.to_spec().end() > self.trace_end()
            {
                return Err(Error::Config(format!(
                    "test attack at day {} must fit between the split and the trace end",
                    attack.start_day
                )));
            }
        }
        Ok(())
    }

    /// The pipeline view of this experiment.
    pub fn to_pipeline(&self, mode: Mode) -> PipelineConfig {
        PipelineConfig {
            scorer: self.scoring.clone(),
            rank_params: self.ranklist,
            esb_prep_len_days: self.reference.prep_len_days,
            esb_block_size: self.reference.block_size,
            esb_ewma_alpha: self.reference.ewma_alpha,
            timer_period: match self.pipeline.timer_period {
                0 => None,
                secs => Some(secs),
            },
            train: self.anfis.train_params(),
            mode,
        }
    }

    /// Timestamp of the train/test boundary.
    pub fn split_time(&self) -> Timestamp {
        u64::from(self.harness.split_day) * 86_400
    }

    /// Timestamp just past the synthetic trace.
    pub fn trace_end(&self) -> Timestamp {
        u64::from(self.events.day_count) * 86_400
    }
}
