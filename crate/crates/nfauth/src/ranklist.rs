//! Decaying ranking lists over item identifiers.
//!
//! Each behavioral feature keeps a ranked list of recently seen items. An
//! occurrence bumps an item's value by a fixed increment; value drains away
//! linearly with the hours since the item was last touched, and entries whose
//! value reaches zero fall off the list. Querying an item yields an anomaly
//! score in `[0, mu_rank]`: zero for the habitual top item, the maximum for an
//! item the list has never seen, and a rank/value blend in between.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{escape, unescape, FeatureKind, Timestamp};

const SECS_PER_HOUR: f64 = 3600.0;

/// Tuning knobs for one feature's ranking list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankParams {
    /// Base value granted to a newly seen item.
    pub alpha: f64,
    /// Value added per occurrence.
    pub beta: f64,
    /// Value lost per hour of inactivity.
    pub lambda_per_hour: f64,
    /// Ceiling of the ranking anomaly score.
    pub mu_rank: f64,
    /// Steepness of the length sigmoid that scales the score ceiling.
    pub c_sig: f64,
    /// Midpoint (list length) of that sigmoid.
    pub b_sig: f64,
    /// Maximum retained list length.
    pub top_n: usize,
}

impl Default for RankParams {
    fn default() -> RankParams {
        RankParams {
            alpha: 1.0,
            beta: 0.5,
            lambda_per_hour: 0.02,
            mu_rank: 1.0,
            c_sig: 1.0,
            b_sig: 5.0,
            top_n: 30,
        }
    }
}

impl RankParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha >= 0.0
            && self.beta > 0.0
            && self.lambda_per_hour >= 0.0
            && self.mu_rank > 0.0
            && self.top_n >= 1
        {
            Ok(())
        } else {
            Err(Error::Config(
                "rank params require alpha >= 0, beta > 0, lambda >= 0, mu_rank > 0, top_n >= 1"
                    .into(),
            ))
        }
    }
}

/// One ranked item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub item: String,
    pub val: f64,
    pub last_update: Timestamp,
    pub occ: u64,
}

/// A ranked, decaying list of items for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingList {
    pub feature: FeatureKind,
    pub params: RankParams,
    entries: Vec<RankEntry>,
}

fn hours_between(earlier: Timestamp, later: Timestamp) -> f64 {
    (later - earlier) as f64 / SECS_PER_HOUR
}

/// Total order for entries: value descending, then most recently touched,
/// then item ascending so equal entries still sort deterministically.
fn entry_order(a: &RankEntry, b: &RankEntry) -> std::cmp::Ordering {
    b.val
        .total_cmp(&a.val)
        .then(b.last_update.cmp(&a.last_update))
        .then(a.item.cmp(&b.item))
}

impl RankingList {
    pub fn new(feature: FeatureKind, params: RankParams) -> RankingList {
        RankingList {
            feature,
            params,
            entries: Vec::new(),
        }
    }

    /// Rebuild a list from dumped entries, re-establishing the invariants.
    pub fn restore(
        feature: FeatureKind,
        params: RankParams,
        mut entries: Vec<RankEntry>,
    ) -> Result<RankingList> {
        params.validate()?;
        if entries.iter().any(|e| e.val <= 0.0 || e.occ == 0) {
            return Err(Error::Config(
                "snapshot entry with val <= 0 or occ = 0".into(),
            ));
        }
        entries.sort_by(entry_order);
        entries.truncate(params.top_n);
        Ok(RankingList {
            feature,
            params,
            entries,
        })
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of an item, or 0 if absent.
    pub fn index_of(&self, item: &str) -> usize {
        self.entries
            .iter()
            .position(|e| e.item == item)
            .map_or(0, |p| p + 1)
    }

    fn latest_update(&self) -> Option<Timestamp> {
        self.entries.iter().map(|e| e.last_update).max()
    }

    fn check_clock(&self, now: Timestamp) -> Result<()> {
        match self.latest_update() {
            Some(last) if now < last => Err(Error::TimeTravel { now, last }),
            _ => Ok(()),
        }
    }

    fn finish_maintenance(&mut self) {
        self.entries.retain(|e| e.val > 0.0);
        self.entries.sort_by(entry_order);
        self.entries.truncate(self.params.top_n);
    }

    /// Drain every entry's value down to `now` and drop the dead ones.
    pub fn decay_to(&mut self, now: Timestamp) -> Result<()> {
        self.check_clock(now)?;
        let lambda = self.params.lambda_per_hour;
        for e in &mut self.entries {
            e.val -= lambda * hours_between(e.last_update, now);
            e.last_update = now;
        }
        self.finish_maintenance();
        Ok(())
    }

    /// Record one occurrence of `item` at `now`.
    ///
    /// A known item gains `beta` minus the decay it accrued since its own last
    /// touch, evaluated as one atomic update; an unknown item enters with
    /// `alpha + beta`. Every other entry is decayed to `now`, dead entries are
    /// removed, and the list is re-sorted and truncated.
    pub fn record_occurrence(&mut self, item: &str, now: Timestamp) -> Result<()> {
        self.check_clock(now)?;
        let lambda = self.params.lambda_per_hour;
        match self.entries.iter_mut().find(|e| e.item == item) {
            Some(e) => {
                e.val += self.params.beta - lambda * hours_between(e.last_update, now);
                e.last_update = now;
                e.occ += 1;
            }
            None => self.entries.push(RankEntry {
                item: item.to_string(),
                val: self.params.alpha + self.params.beta,
                last_update: now,
                occ: 1,
            }),
        }
        for e in &mut self.entries {
            if e.item != item {
                e.val -= lambda * hours_between(e.last_update, now);
                e.last_update = now;
            }
        }
        self.finish_maintenance();
        Ok(())
    }

    /// Anomaly score for `item` against the current list state.
    ///
    /// Branches: an empty list scores 0 for everything; with one or two known
    /// items an absent item scores `mu_rank/2` and a present one 0; with a
    /// longer list an absent item scores the full `mu_rank` and a present one
    /// a blend of its rank position and value distance from the top, capped
    /// by a ceiling that grows with list length.
    pub fn ranking_score(&self, item: &str) -> f64 {
        let len = self.entries.len();
        if len == 0 {
            return 0.0;
        }
        let index = self.index_of(item);
        if len <= 2 {
            return if index == 0 {
                self.params.mu_rank / 2.0
            } else {
                0.0
            };
        }
        if index == 0 {
            return self.params.mu_rank;
        }
        let vmax = self.entries[0].val;
        let vmin = self.entries[len - 1].val;
        let val = self.entries[index - 1].val;
        let rank_term = ((index - 1) as f64 / len as f64).powi(2);
        let value_term = if vmax == vmin {
            0.0
        } else {
            ((vmax - val) / (vmax - vmin)).powi(2)
        };
        (adjusted_max(len, &self.params) / 2.0) * (rank_term + value_term)
    }

    /// Dump as `item= val= occ= last_update=` lines under a feature header.
    pub fn snapshot(&self) -> String {
        let mut out = format!("# feature={}\n", self.feature.name());
        for e in &self.entries {
            out.push_str(&format!(
                "item={} val={} occ={} last_update={}\n",
                escape(&e.item),
                e.val,
                e.occ,
                e.last_update
            ));
        }
        out
    }
}

/// Length-adjusted score ceiling: a sigmoid over list length so short lists
/// (little evidence about the user) cannot assign large anomaly scores.
pub fn adjusted_max(len: usize, params: &RankParams) -> f64 {
    params.mu_rank / (1.0 + (-params.c_sig * (len as f64 - params.b_sig)).exp())
}

/// Dump several lists as one snapshot document.
pub fn snapshot_lists(lists: &[RankingList]) -> String {
    lists.iter().map(RankingList::snapshot).collect()
}

/// Parse a snapshot document back into lists, all sharing `params`.
pub fn parse_snapshot(text: &str, params: RankParams) -> Result<Vec<RankingList>> {
    let mut lists: Vec<(FeatureKind, Vec<RankEntry>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: lineno, msg };
        if let Some(rest) = line.strip_prefix("# feature=") {
            let kind = FeatureKind::from_name(rest.trim())
                .ok_or_else(|| parse_err(format!("unknown feature {:?}", rest.trim())))?;
            lists.push((kind, Vec::new()));
            continue;
        }
        let section = lists
            .last_mut()
            .ok_or_else(|| parse_err("entry before any feature header".into()))?;
        let mut item = None;
        let mut val = None;
        let mut occ = None;
        let mut last_update = None;
        for field in line.split(' ') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got {field:?}")))?;
            match key {
                "item" => item = Some(unescape(value)?),
                "val" => {
                    val = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| parse_err(format!("bad val: {e}")))?,
                    )
                }
                "occ" => {
                    occ = Some(
                        value
                            .parse::<u64>()
                            .map_err(|e| parse_err(format!("bad occ: {e}")))?,
                    )
                }
                "last_update" => {
                    last_update = Some(
                        value
                            .parse::<Timestamp>()
                            .map_err(|e| parse_err(format!("bad last_update: {e}")))?,
                    )
                }
                other => return Err(parse_err(format!("unknown field {other:?}"))),
            }
        }
        match (item, val, occ, last_update) {
            (Some(item), Some(val), Some(occ), Some(last_update)) => section.1.push(RankEntry {
                item,
                val,
                occ,
                last_update,
            }),
            _ => return Err(parse_err("entry needs item, val, occ, last_update".into())),
        }
    }
    lists
        .into_iter()
        .map(|(kind, entries)| RankingList::restore(kind, params, entries))
        .collect()
}
