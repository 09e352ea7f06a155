//! End-to-end authentication over an event trace.
//!
//! This module wires the profile scorer, the sliding baseline references and
//! the fuzzy inference model together: a trace is replayed event by event,
//! every emitted window yields the four model inputs (foreground score and
//! its distance to reference, background score and its distance to
//! reference), and a trained model turns those into a threat level that is
//! decoded to a verdict. It also assembles labeled training sets from
//! legitimate and attack-grafted traces.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anfis::train::TrainParams;
use crate::anfis::{AnfisModel, TrainingSample};
use crate::events::{EventTrace, Timestamp};
use crate::ranklist::RankParams;
use crate::reference::EsbState;
use crate::scoring::{
    process_event, score_event, DurationStats, FeatureScorerConfig, RankingLists, SessionState,
    WindowRecord,
};
use crate::{Error, Result};

/// Whether a replay may emit verdicts.
///
/// The window stream is identical in both modes; deployment additionally
/// runs the model on every post-preparation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Training,
    Deployment,
}

/// Everything a replay needs: scorer weights, ranking decay, baseline
/// schedule, authentication timer, model hyperparameters and the mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scorer: FeatureScorerConfig,
    pub rank_params: RankParams,
    /// Days of scores collected before the baselines go live.
    pub esb_prep_len_days: f64,
    /// Scores averaged per baseline block.
    pub esb_block_size: u32,
    /// Blend factor folding a finished block into the baseline.
    pub esb_ewma_alpha: f64,
    /// Max seconds between authentications while the screen stays on;
    /// `None` turns windows into whole screen sessions.
    pub timer_period: Option<u64>,
    pub train: TrainParams,
    pub mode: Mode,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            scorer: FeatureScorerConfig::default(),
            rank_params: RankParams::default(),
            esb_prep_len_days: 7.0,
            esb_block_size: 7,
            esb_ewma_alpha: 0.2,
            timer_period: Some(300),
            train: TrainParams::default(),
            mode: Mode::Training,
        }
    }
}

impl PipelineConfig {
    /// Check every embedded knob; returns the first problem found.
    pub fn validate(&self) -> Result<()> {
        self.scorer.validate()?;
        self.rank_params.validate()?;
        // EsbState::new performs the baseline-schedule checks.
        EsbState::new(
            self.esb_prep_len_days,
            self.esb_block_size,
            self.esb_ewma_alpha,
        )?;
        Ok(())
    }
}

/// The four model inputs computed for one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuthInputs {
    /// Foreground anomaly score of the window.
    pub as_fore: f64,
    /// Foreground score minus its baseline reference.
    pub ard_fore: f64,
    /// Background anomaly score at the window's end.
    pub as_back: f64,
    /// Background score minus its baseline reference.
    pub ard_back: f64,
}

impl AuthInputs {
    /// Input vector in model order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.as_fore, self.ard_fore, self.as_back, self.ard_back]
    }
}

/// Three-way outcome decoded from a threat level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Legitimate,
    Suspicious,
    Adversary,
}

impl Verdict {
    /// Nearest of the class targets +1 / 0 / −1, with boundary values
    /// resolving toward the more severe class: −0.5 is already an adversary,
    /// +0.5 is already suspicious.
    pub fn from_threat(threat: f64) -> Verdict {
        if threat <= -0.5 {
            Verdict::Adversary
        } else if threat <= 0.5 {
            Verdict::Suspicious
        } else {
            Verdict::Legitimate
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Legitimate => "legitimate",
            Verdict::Suspicious => "suspicious",
            Verdict::Adversary => "adversary",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Model output for one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub window_end: Timestamp,
    pub threat_level: f64,
    pub verdict: Verdict,
}

/// One window of a replay: the raw record, the baseline references in force
/// when it closed (absent during preparation), the model inputs derived from
/// them, and — on deployment replays — the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineWindow {
    pub record: WindowRecord,
    pub ref_fore: Option<f64>,
    pub ref_back: Option<f64>,
    pub inputs: Option<AuthInputs>,
    pub decision: Option<Decision>,
}

impl PipelineWindow {
    /// Decision-log row, present once the window has both inputs and a
    /// verdict.
    pub fn decision_log_line(&self) -> Option<String> {
        let inputs = self.inputs.as_ref()?;
        let decision = self.decision.as_ref()?;
        Some(format!(
            "{},{},{},{},{},{},{}",
            decision.window_end,
            inputs.as_fore,
            inputs.as_back,
            inputs.ard_fore,
            inputs.ard_back,
            decision.threat_level,
            decision.verdict
        ))
    }
}

/// Column header for decision logs.
pub const DECISION_LOG_HEADER: &str = "# t,as_fore,as_back,ard_fore,ard_back,threat,verdict";

/// Profile state left behind by a replay: the ranking lists, duration
/// statistics and session machine as of the last event.
#[derive(Debug, Clone)]
pub struct ProfileState {
    pub lists: RankingLists,
    pub stats: DurationStats,
    pub session: SessionState,
}

/// Replay a trace through scoring and the baseline references; no model
/// involved. Windows closed while the baselines are still preparing carry no
/// inputs.
fn replay_windows(
    config: &PipelineConfig,
    trace: &EventTrace,
) -> Result<(Vec<PipelineWindow>, ProfileState)> {
    let mut lists = RankingLists::new(config.rank_params);
    let mut stats = DurationStats::new();
    let mut session = SessionState::new(config.timer_period, config.scorer.mu_damp_per_hour);
    let mut esb_fore = EsbState::new(
        config.esb_prep_len_days,
        config.esb_block_size,
        config.esb_ewma_alpha,
    )?;
    let mut esb_back = EsbState::new(
        config.esb_prep_len_days,
        config.esb_block_size,
        config.esb_ewma_alpha,
    )?;
    let mut windows = Vec::new();
    for event in &trace.events {
        let contribution = score_event(
            &config.scorer,
            &mut lists,
            &mut stats,
            &trace.contact_list,
            event,
        )?;
        if let Some(record) = process_event(&mut session, contribution, event) {
            let ref_fore = esb_fore.update(record.as_fore, record.window_end);
            let ref_back = esb_back.update(record.as_back, record.window_end);
            let inputs = match (ref_fore, ref_back) {
                (Some(rf), Some(rb)) => Some(AuthInputs {
                    as_fore: record.as_fore,
                    ard_fore: record.as_fore - rf,
                    as_back: record.as_back,
                    ard_back: record.as_back - rb,
                }),
                _ => None,
            };
            windows.push(PipelineWindow {
                record,
                ref_fore,
                ref_back,
                inputs,
                decision: None,
            });
        }
    }
    Ok((
        windows,
        ProfileState {
            lists,
            stats,
            session,
        },
    ))
}

/// Replay a trace end to end.
///
/// Training mode only produces the window stream; deployment mode
/// additionally decides every post-preparation window with the given model
/// (and rejects a missing one). The returned decisions mirror the
/// `decision` fields of the windows, in trace order.
pub fn run_trace(
    config: &PipelineConfig,
    trace: &EventTrace,
    model: Option<&AnfisModel>,
) -> Result<(Vec<PipelineWindow>, Vec<Decision>)> {
    let (windows, decisions, _) = run_trace_full(config, trace, model)?;
    Ok((windows, decisions))
}

/// Like [`run_trace`], additionally handing back the final profile state —
/// for state dumps and warm-start experiments.
pub fn run_trace_full(
    config: &PipelineConfig,
    trace: &EventTrace,
    model: Option<&AnfisModel>,
) -> Result<(Vec<PipelineWindow>, Vec<Decision>, ProfileState)> {
    config.validate()?;
    if config.mode == Mode::Deployment && model.is_none() {
        return Err(Error::Config(
            "deployment replay requires a trained model".into(),
        ));
    }
    let (mut windows, state) = replay_windows(config, trace)?;
    let mut decisions = Vec::new();
    if config.mode == Mode::Deployment {
        let model = model.expect("checked above");
        for window in &mut windows {
            if let Some(inputs) = &window.inputs {
                let decision = decide(model, window.record.window_end, inputs)?;
                window.decision = Some(decision);
                decisions.push(decision);
            }
        }
    }
    Ok((windows, decisions, state))
}

/// Score one window's inputs and decode the verdict.
pub fn decide(model: &AnfisModel, window_end: Timestamp, inputs: &AuthInputs) -> Result<Decision> {
    let threat_level = model.predict(&inputs.to_vec())?;
    if !threat_level.is_finite() {
        return Err(Error::Evaluation(format!(
            "non-finite threat level at t={window_end}"
        )));
    }
    Ok(Decision {
        window_end,
        threat_level,
        verdict: Verdict::from_threat(threat_level),
    })
}

/// An attack-grafted trace together with the grafted interval
/// `[attack_start, attack_end)`.
#[derive(Debug, Clone, Copy)]
pub struct GraftedTrace<'a> {
    pub trace: &'a EventTrace,
    pub attack_start: Timestamp,
    pub attack_end: Timestamp,
}

impl GraftedTrace<'_> {
    fn covers(&self, t: Timestamp) -> bool {
        self.attack_start <= t && t < self.attack_end
    }
}

/// Build a labeled training set.
///
/// The legitimate trace contributes every post-preparation window with
/// target +1. Grafted traces contribute only the windows that close inside
/// their attack interval — the rest of those traces is ordinary owner
/// behaviour and would poison the classes — with target 0 for the suspicious
/// set and −1 for the adversary set. A class that was given traces but ends
/// up with zero windows is an error: the caller's intervals or preparation
/// length exclude everything.
pub fn build_dataset(
    config: &PipelineConfig,
    legit_trace: &EventTrace,
    suspicious_traces: &[GraftedTrace<'_>],
    adversary_traces: &[GraftedTrace<'_>],
) -> Result<Vec<TrainingSample>> {
    config.validate()?;
    let mut samples = Vec::new();
    let (legit_windows, _) = replay_windows(config, legit_trace)?;
    let before = samples.len();
    samples.extend(
        legit_windows
            .iter()
            .filter_map(|w| w.inputs.as_ref())
            .map(|inputs| TrainingSample::new(inputs.to_vec(), 1.0)),
    );
    if samples.len() == before {
        return Err(Error::Dataset(
            "legitimate trace yields no post-preparation windows".into(),
        ));
    }
    for (traces, target, label) in [
        (suspicious_traces, 0.0, "suspicious"),
        (adversary_traces, -1.0, "adversary"),
    ] {
        if traces.is_empty() {
            continue;
        }
        let before = samples.len();
        for grafted in traces {
            let (windows, _) = replay_windows(config, grafted.trace)?;
            samples.extend(
                windows
                    .iter()
                    .filter(|w| grafted.covers(w.record.window_end))
                    .filter_map(|w| w.inputs.as_ref())
                    .map(|inputs| TrainingSample::new(inputs.to_vec(), target)),
            );
        }
        if samples.len() == before {
            return Err(Error::Dataset(format!(
                "{label} traces yield no post-preparation windows inside their attack intervals"
            )));
        }
    }
    Ok(samples)
}
