//! Per-event anomaly scoring and screen-session windowing.
//!
//! Every event is judged against the profile as it stood when the event
//! arrived: a ranking-list check (is this item one the user habitually
//! touches?), a contact-list check for telephony, and a duration check
//! against per-item running statistics. The weighted sub-scores sum to the
//! event's contribution. Foreground contributions accumulate over a screen
//! session and are emitted as authentication windows — at screen-off, or
//! periodically while the session runs; background activity feeds a damped
//! per-feature score that rides along with each emitted window.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, FeatureKind, ScreenTransition, Timestamp, SCREEN_ITEM};
use crate::ranklist::{RankParams, RankingList};

const SECS_PER_HOUR: f64 = 3600.0;

fn hours_between(earlier: Timestamp, later: Timestamp) -> f64 {
    later.saturating_sub(earlier) as f64 / SECS_PER_HOUR
}

/// Which checks apply to a feature kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindFlags {
    pub use_ranking: bool,
    pub use_contacts: bool,
    pub use_duration: bool,
}

impl KindFlags {
    const fn new(use_ranking: bool, use_contacts: bool, use_duration: bool) -> KindFlags {
        KindFlags {
            use_ranking,
            use_contacts,
            use_duration,
        }
    }
}

/// The canonical check table: telephony gets all three checks (SMS has no
/// meaningful duration), screen transitions are judged on session length
/// alone, and everything else on ranking plus duration.
pub fn standard_flags(kind: FeatureKind) -> KindFlags {
    match kind {
        FeatureKind::ScreenStatus => KindFlags::new(false, false, true),
        FeatureKind::IncomingCall | FeatureKind::OutgoingCall => KindFlags::new(true, true, true),
        FeatureKind::IncomingSms | FeatureKind::OutgoingSms => KindFlags::new(true, true, false),
        FeatureKind::WifiHistory
        | FeatureKind::ApplicationHistory
        | FeatureKind::BrowserHistory => KindFlags::new(true, false, true),
    }
}

/// Weights and shared constants for event scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureScorerConfig {
    /// Per-kind condition flags; must match the standard table.
    #[serde(default = "default_flag_table")]
    pub flags: BTreeMap<FeatureKind, KindFlags>,
    pub weight_ranking: f64,
    pub weight_contacts: f64,
    pub weight_duration: f64,
    /// Duration z-scores above this cap all count as maximally anomalous.
    pub duration_z_cap: f64,
    /// Background score drain per hour of feature inactivity.
    pub mu_damp_per_hour: f64,
    /// Smoothing weight for per-item duration statistics.
    pub duration_ewma_alpha: f64,
}

fn default_flag_table() -> BTreeMap<FeatureKind, KindFlags> {
    FeatureKind::ALL
        .iter()
        .map(|&k| (k, standard_flags(k)))
        .collect()
}

impl Default for FeatureScorerConfig {
    fn default() -> FeatureScorerConfig {
        FeatureScorerConfig {
            flags: default_flag_table(),
            weight_ranking: 1.0,
            weight_contacts: 1.0,
            weight_duration: 1.0,
            duration_z_cap: 3.0,
            mu_damp_per_hour: 0.05,
            duration_ewma_alpha: 0.2,
        }
    }
}

impl FeatureScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weight_ranking < 0.0 || self.weight_contacts < 0.0 || self.weight_duration < 0.0 {
            return Err(Error::Config("score weights must be non-negative".into()));
        }
        if self.duration_z_cap <= 0.0
            || !(0.0..1.0).contains(&self.duration_ewma_alpha)
            || self.duration_ewma_alpha == 0.0
        {
            return Err(Error::Config(
                "duration_z_cap must be positive and ewma alpha in (0,1)".into(),
            ));
        }
        if self.mu_damp_per_hour < 0.0 {
            return Err(Error::Config(
                "mu_damp_per_hour must be non-negative".into(),
            ));
        }
        for &kind in FeatureKind::ALL.iter() {
            match self.flags.get(&kind) {
                Some(&f) if f == standard_flags(kind) => {}
                Some(_) => {
                    return Err(Error::Config(format!(
                        "condition flags for {kind} deviate from the standard table"
                    )))
                }
                None => return Err(Error::Config(format!("no condition flags for {kind}"))),
            }
        }
        Ok(())
    }

    fn flags_for(&self, kind: FeatureKind) -> Result<KindFlags> {
        let f = self
            .flags
            .get(&kind)
            .copied()
            .unwrap_or_else(|| standard_flags(kind));
        if !f.use_ranking && !f.use_contacts && !f.use_duration {
            return Err(Error::Config(format!(
                "{kind} has no enabled scoring condition"
            )));
        }
        Ok(f)
    }
}

/// Running duration statistics for one (kind, item).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStat {
    pub ewma_mean: f64,
    pub ewma_var: f64,
    pub sample_count: u64,
}

/// Per-item duration statistics across all kinds that check duration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    stats: BTreeMap<(FeatureKind, String), DurationStat>,
}

impl DurationStats {
    pub fn new() -> DurationStats {
        DurationStats::default()
    }

    pub fn get(&self, kind: FeatureKind, item: &str) -> Option<&DurationStat> {
        self.stats.get(&(kind, item.to_string()))
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Capped, normalized duration anomaly in [0,1]. Zero until three
    /// samples exist; a zero-variance history treats any deviation as
    /// maximal.
    fn anomaly(&self, kind: FeatureKind, item: &str, duration: u64, z_cap: f64) -> f64 {
        let Some(stat) = self.stats.get(&(kind, item.to_string())) else {
            return 0.0;
        };
        if stat.sample_count < 3 {
            return 0.0;
        }
        let diff = duration as f64 - stat.ewma_mean;
        let z = if stat.ewma_var <= 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff.abs() / stat.ewma_var.sqrt()
        };
        z.min(z_cap) / z_cap
    }

    fn update(&mut self, kind: FeatureKind, item: &str, duration: u64, alpha: f64) {
        let x = duration as f64;
        let stat = self
            .stats
            .entry((kind, item.to_string()))
            .or_insert(DurationStat {
                ewma_mean: x,
                ewma_var: 0.0,
                sample_count: 0,
            });
        if stat.sample_count > 0 {
            let diff = x - stat.ewma_mean;
            let incr = alpha * diff;
            stat.ewma_mean += incr;
            stat.ewma_var = (1.0 - alpha) * (stat.ewma_var + diff * incr);
        }
        stat.sample_count += 1;
    }
}

/// One ranking list per feature kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingLists {
    lists: BTreeMap<FeatureKind, RankingList>,
}

impl RankingLists {
    /// Build lists for every kind that uses ranking, all with `params`.
    pub fn new(params: RankParams) -> RankingLists {
        let lists = FeatureKind::ALL
            .iter()
            .filter(|&&k| standard_flags(k).use_ranking)
            .map(|&k| (k, RankingList::new(k, params)))
            .collect();
        RankingLists { lists }
    }

    pub fn get(&self, kind: FeatureKind) -> Option<&RankingList> {
        self.lists.get(&kind)
    }

    pub fn get_mut(&mut self, kind: FeatureKind) -> Option<&mut RankingList> {
        self.lists.get_mut(&kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RankingList> {
        self.lists.values()
    }

    /// Snapshot every list as one document, in feature order.
    pub fn snapshot(&self) -> String {
        self.lists.values().map(RankingList::snapshot).collect()
    }
}

/// Score one event against the profile, then fold it into the profile.
///
/// The ranking list is decayed to the event's timestamp and queried before
/// the occurrence is recorded — an event is judged against the profile as it
/// stood, otherwise first occurrences would legitimize themselves. Duration
/// statistics likewise score first, update after. Screen-on contributes
/// nothing; screen-off is scored on the session length it carries.
pub fn score_event(
    config: &FeatureScorerConfig,
    lists: &mut RankingLists,
    stats: &mut DurationStats,
    contacts: &BTreeSet<String>,
    event: &Event,
) -> Result<f64> {
    if event.screen_transition == Some(ScreenTransition::On) {
        return Ok(0.0);
    }
    let flags = config.flags_for(event.kind)?;
    let mut contribution = 0.0;

    if flags.use_ranking {
        if let Some(list) = lists.get_mut(event.kind) {
            list.decay_to(event.timestamp)?;
            contribution +=
                config.weight_ranking * list.ranking_score(&event.item) / list.params.mu_rank;
            list.record_occurrence(&event.item, event.timestamp)?;
        }
    }
    if flags.use_contacts && !contacts.contains(&event.item) {
        contribution += config.weight_contacts;
    }
    if flags.use_duration {
        let item = if event.kind == FeatureKind::ScreenStatus {
            SCREEN_ITEM
        } else {
            event.item.as_str()
        };
        contribution += config.weight_duration
            * stats.anomaly(event.kind, item, event.duration, config.duration_z_cap);
        stats.update(event.kind, item, event.duration, config.duration_ewma_alpha);
    }
    Ok(contribution)
}

/// What closed an authentication window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowTrigger {
    ScreenOff,
    TimerExpiry,
}

impl std::fmt::Display for WindowTrigger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WindowTrigger::ScreenOff => "screen_off",
            WindowTrigger::TimerExpiry => "timer",
        })
    }
}

/// One emitted authentication window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_end: Timestamp,
    pub as_fore: f64,
    pub as_back: f64,
    pub trigger: WindowTrigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct BackgroundComponent {
    component: f64,
    last_event_time: Timestamp,
}

/// The screen-session state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    screen_on: bool,
    window_start: Timestamp,
    as_fore_accum: f64,
    last_auth_time: Timestamp,
    /// Maximum seconds between authentications while the screen stays on;
    /// `None` disables the timer so windows are whole sessions.
    timer_period: Option<u64>,
    background: BTreeMap<FeatureKind, BackgroundComponent>,
    mu_damp_per_hour: f64,
}

impl SessionState {
    pub fn new(timer_period: Option<u64>, mu_damp_per_hour: f64) -> SessionState {
        SessionState {
            screen_on: false,
            window_start: 0,
            as_fore_accum: 0.0,
            last_auth_time: 0,
            timer_period,
            background: BTreeMap::new(),
            mu_damp_per_hour,
        }
    }

    pub fn screen_on(&self) -> bool {
        self.screen_on
    }

    pub fn as_fore_accum(&self) -> f64 {
        self.as_fore_accum
    }

    /// Background score as of `now`: each feature's component less the drain
    /// it accrued since that feature's last event, clamped at zero. Reading
    /// never mutates the stored components.
    pub fn background_score(&self, now: Timestamp) -> f64 {
        self.background
            .values()
            .map(|c| {
                (c.component - self.mu_damp_per_hour * hours_between(c.last_event_time, now))
                    .max(0.0)
            })
            .sum()
    }

    fn emit(&self, now: Timestamp, trigger: WindowTrigger) -> WindowRecord {
        WindowRecord {
            window_end: now,
            as_fore: self.as_fore_accum,
            as_back: self.background_score(now),
            trigger,
        }
    }
}

/// Advance the session state machine by one scored event.
///
/// Foreground contributions accumulate while the screen is on. Screen-off
/// closes the window and resets the accumulator; a timer expiry emits a
/// window but keeps both the session and the accumulated score running.
/// Background events only feed their feature's damped component — they never
/// trigger authentication.
pub fn process_event(
    session: &mut SessionState,
    contribution: f64,
    event: &Event,
) -> Option<WindowRecord> {
    let ts = event.timestamp;
    match event.screen_transition {
        Some(ScreenTransition::On) => {
            if session.screen_on {
                log::debug!("screen On at {ts} while already on; ignoring");
                return None;
            }
            session.screen_on = true;
            session.window_start = ts;
            session.last_auth_time = ts;
            return None;
        }
        Some(ScreenTransition::Off) => {
            if !session.screen_on {
                log::debug!("screen Off at {ts} without a session; ignoring");
                return None;
            }
            session.as_fore_accum += contribution;
            let record = session.emit(ts, WindowTrigger::ScreenOff);
            session.screen_on = false;
            session.as_fore_accum = 0.0;
            return Some(record);
        }
        None => {}
    }

    if event.kind.is_foreground() {
        if !session.screen_on {
            // Profile state was already updated by scoring; a foreground
            // event with no session contributes to no window.
            log::debug!("foreground {} at {ts} with screen off", event.kind);
            return None;
        }
        session.as_fore_accum += contribution;
        if let Some(period) = session.timer_period {
            if ts.saturating_sub(session.last_auth_time) >= period {
                let record = session.emit(ts, WindowTrigger::TimerExpiry);
                session.last_auth_time = ts;
                return Some(record);
            }
        }
        None
    } else {
        // Leaky bucket per background feature: drain what elapsed since the
        // feature's own last event, then add the new contribution.
        let component = session
            .background
            .entry(event.kind)
            .or_insert(BackgroundComponent {
                component: 0.0,
                last_event_time: ts,
            });
        let drained = (component.component
            - session.mu_damp_per_hour * hours_between(component.last_event_time, ts))
        .max(0.0);
        component.component = drained + contribution;
        component.last_event_time = ts;
        None
    }
}
