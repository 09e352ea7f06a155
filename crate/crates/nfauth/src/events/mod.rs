//! Behavioral event model and line-delimited trace serialization.
//!
//! A trace is the raw material everything downstream consumes: a stream of
//! timestamped observations (calls, SMS, app usage, browsing, WiFi
//! connections, screen transitions) plus the device contact list.

mod synth;

pub use synth::{generate_trace, PoolSpec, SyntheticProfile};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Item identifier used by screen status events.
pub const SCREEN_ITEM: &str = "SCREEN";

/// Seconds since epoch.
pub type Timestamp = u64;

/// The eight monitored behavioral features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    IncomingSms,
    OutgoingSms,
    IncomingCall,
    OutgoingCall,
    BrowserHistory,
    WifiHistory,
    ScreenStatus,
    ApplicationHistory,
}

impl FeatureKind {
    /// All kinds, in declaration order.
    pub const ALL: [FeatureKind; 8] = [
        FeatureKind::IncomingSms,
        FeatureKind::OutgoingSms,
        FeatureKind::IncomingCall,
        FeatureKind::OutgoingCall,
        FeatureKind::BrowserHistory,
        FeatureKind::WifiHistory,
        FeatureKind::ScreenStatus,
        FeatureKind::ApplicationHistory,
    ];

    /// User-initiated activities. Everything else happens to the device
    /// regardless of who is holding it.
    pub fn is_foreground(self) -> bool {
        matches!(
            self,
            FeatureKind::ScreenStatus
                | FeatureKind::ApplicationHistory
                | FeatureKind::OutgoingSms
                | FeatureKind::OutgoingCall
                | FeatureKind::BrowserHistory
        )
    }

    pub fn is_background(self) -> bool {
        !self.is_foreground()
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::IncomingSms => "IncomingSms",
            FeatureKind::OutgoingSms => "OutgoingSms",
            FeatureKind::IncomingCall => "IncomingCall",
            FeatureKind::OutgoingCall => "OutgoingCall",
            FeatureKind::BrowserHistory => "BrowserHistory",
            FeatureKind::WifiHistory => "WifiHistory",
            FeatureKind::ScreenStatus => "ScreenStatus",
            FeatureKind::ApplicationHistory => "ApplicationHistory",
        }
    }

    pub fn from_name(s: &str) -> Option<FeatureKind> {
        FeatureKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Screen transition carried by `ScreenStatus` events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScreenTransition {
    On,
    Off,
}

/// One timestamped behavioral observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub timestamp: Timestamp,
    pub kind: FeatureKind,
    /// Phone number, app package, SSID, URL host, or [`SCREEN_ITEM`].
    pub item: String,
    /// Seconds; 0 when inapplicable.
    pub duration: u64,
    /// Present exactly on `ScreenStatus` events.
    pub screen_transition: Option<ScreenTransition>,
}

impl Event {
    pub fn new(
        timestamp: Timestamp,
        kind: FeatureKind,
        item: impl Into<String>,
        duration: u64,
    ) -> Event {
        Event {
            timestamp,
            kind,
            item: item.into(),
            duration,
            screen_transition: None,
        }
    }

    pub fn screen(timestamp: Timestamp, transition: ScreenTransition, duration: u64) -> Event {
        Event {
            timestamp,
            kind: FeatureKind::ScreenStatus,
            item: SCREEN_ITEM.to_string(),
            duration,
            screen_transition: Some(transition),
        }
    }
}

/// A full observation stream for one device profile.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventTrace {
    pub owner: String,
    pub events: Vec<Event>,
    pub contact_list: BTreeSet<String>,
}

impl EventTrace {
    pub fn new(owner: impl Into<String>) -> EventTrace {
        EventTrace {
            owner: owner.into(),
            events: Vec::new(),
            contact_list: BTreeSet::new(),
        }
    }

    /// Stable sort by timestamp; ties keep input order.
    pub fn sort_events(&mut self) {
        self.events.sort_by_key(|e| e.timestamp);
    }

    /// Timestamp span `(first, last)` of the trace, if non-empty.
    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => Some((a.timestamp, b.timestamp)),
            _ => None,
        }
    }

    /// Every distinct item identifier in the trace, per feature kind or overall.
    pub fn item_set(&self) -> BTreeSet<&str> {
        self.events.iter().map(|e| e.item.as_str()).collect()
    }
}

// Value escaping for the line format: the separator is a single space, so
// values must not contain raw spaces; commas separate contact entries.
pub(crate) fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\n' => out.push_str("\\n"),
            ',' => out.push_str("\\c"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape(value: &str) -> Result<String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('s') => out.push(' '),
            Some('n') => out.push('\n'),
            Some('c') => out.push(','),
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!(
                        "bad escape sequence \\{}",
                        other.map(String::from).unwrap_or_default()
                    ),
                })
            }
        }
    }
    Ok(out)
}

/// Serialize a trace to the line-delimited key-value format.
///
/// Two header lines carry the owner and contact list; each following line is
/// one event: `ts=<int> kind=<name> item=<str> dur=<int> [screen=on|off]`.
pub fn serialize_trace(trace: &EventTrace) -> String {
    let mut out = String::new();
    out.push_str(&format!("# owner={}\n", escape(&trace.owner)));
    let contacts: Vec<String> = trace.contact_list.iter().map(|c| escape(c)).collect();
    out.push_str(&format!("# contacts={}\n", contacts.join(",")));
    for ev in &trace.events {
        out.push_str(&format!(
            "ts={} kind={} item={} dur={}",
            ev.timestamp,
            ev.kind.name(),
            escape(&ev.item),
            ev.duration
        ));
        match ev.screen_transition {
            Some(ScreenTransition::On) => out.push_str(" screen=on"),
            Some(ScreenTransition::Off) => out.push_str(" screen=off"),
            None => {}
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parse a trace from the line-delimited key-value format.
///
/// Events are re-sorted into stable timestamp order; malformed lines fail
/// with their 1-based line number.
pub fn parse_trace(text: &str) -> Result<EventTrace> {
    let mut trace = EventTrace::default();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            if let Some(v) = header.strip_prefix("owner=") {
                trace.owner = unescape(v).map_err(|_| parse_err(lineno, "bad escape in owner"))?;
            } else if let Some(v) = header.strip_prefix("contacts=") {
                for part in v.split(',').filter(|p| !p.is_empty()) {
                    trace.contact_list.insert(
                        unescape(part).map_err(|_| parse_err(lineno, "bad escape in contacts"))?,
                    );
                }
            }
            // Unrecognized header lines are comments.
            continue;
        }

        let mut ts: Option<Timestamp> = None;
        let mut kind: Option<FeatureKind> = None;
        let mut item: Option<String> = None;
        let mut dur: Option<u64> = None;
        let mut screen: Option<ScreenTransition> = None;
        for token in line.split(' ').filter(|t| !t.is_empty()) {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| parse_err(lineno, format!("token `{token}` is not key=value")))?;
            match key {
                "ts" => {
                    ts = Some(
                        value
                            .parse()
                            .map_err(|_| parse_err(lineno, format!("bad timestamp `{value}`")))?,
                    )
                }
                "kind" => {
                    kind = Some(
                        FeatureKind::from_name(value)
                            .ok_or_else(|| parse_err(lineno, format!("unknown kind `{value}`")))?,
                    )
                }
                "item" => {
                    item =
                        Some(unescape(value).map_err(|_| parse_err(lineno, "bad escape in item"))?)
                }
                "dur" => {
                    dur = Some(
                        value
                            .parse()
                            .map_err(|_| parse_err(lineno, format!("bad duration `{value}`")))?,
                    )
                }
                "screen" => {
                    screen = Some(match value {
                        "on" => ScreenTransition::On,
                        "off" => ScreenTransition::Off,
                        other => {
                            return Err(parse_err(lineno, format!("bad screen value `{other}`")))
                        }
                    })
                }
                other => return Err(parse_err(lineno, format!("unknown field `{other}`"))),
            }
        }
        let timestamp = ts.ok_or_else(|| parse_err(lineno, "missing ts"))?;
        let kind = kind.ok_or_else(|| parse_err(lineno, "missing kind"))?;
        let item = item.ok_or_else(|| parse_err(lineno, "missing item"))?;
        let duration = dur.ok_or_else(|| parse_err(lineno, "missing dur"))?;
        if item.is_empty() {
            return Err(parse_err(lineno, "empty item"));
        }
        if kind == FeatureKind::ScreenStatus && screen.is_none() {
            return Err(parse_err(lineno, "ScreenStatus event without screen field"));
        }
        if kind != FeatureKind::ScreenStatus && screen.is_some() {
            return Err(parse_err(lineno, "screen field on non-ScreenStatus event"));
        }
        trace.events.push(Event {
            timestamp,
            kind,
            item,
            duration,
            screen_transition: screen,
        });
    }
    trace.sort_events();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn foreground_background_partition_is_total_and_disjoint() {
        let fg: Vec<_> = FeatureKind::ALL
            .iter()
            .filter(|k| k.is_foreground())
            .collect();
        let bg: Vec<_> = FeatureKind::ALL
            .iter()
            .filter(|k| k.is_background())
            .collect();
        assert_eq!(fg.len() + bg.len(), 8);
        assert_eq!(fg.len(), 5);
        assert!(bg.contains(&&FeatureKind::WifiHistory));
        assert!(bg.contains(&&FeatureKind::IncomingSms));
        assert!(bg.contains(&&FeatureKind::IncomingCall));
    }

    #[test]
    fn parse_empty_input_yields_empty_trace() {
        let trace = parse_trace("").unwrap();
        assert_eq!(trace.events.len(), 0);
    }

    #[test]
    fn parse_single_call_line() {
        let trace = parse_trace("ts=1000 kind=OutgoingCall item=+441 dur=60\n").unwrap();
        assert_eq!(trace.events.len(), 1);
        let ev = &trace.events[0];
        assert_eq!(ev.timestamp, 1000);
        assert_eq!(ev.kind, FeatureKind::OutgoingCall);
        assert_eq!(ev.item, "+441");
        assert_eq!(ev.duration, 60);
        assert_eq!(ev.screen_transition, None);
    }

    #[test]
    fn parse_reorders_by_timestamp() {
        let text = "ts=2000 kind=ApplicationHistory item=a dur=5\nts=1000 kind=ApplicationHistory item=b dur=5\n";
        let trace = parse_trace(text).unwrap();
        assert_eq!(trace.events[0].timestamp, 1000);
        assert_eq!(trace.events[1].timestamp, 2000);
    }

    #[test]
    fn parse_is_stable_on_timestamp_ties() {
        let text = "ts=10 kind=ApplicationHistory item=first dur=1\nts=10 kind=ApplicationHistory item=second dur=1\n";
        let trace = parse_trace(text).unwrap();
        assert_eq!(trace.events[0].item, "first");
        assert_eq!(trace.events[1].item, "second");
    }

    #[test]
    fn unknown_kind_is_an_error_with_line_number() {
        let err = parse_trace("ts=1 kind=Nope item=a dur=0\n").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("Nope"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let err = parse_trace("ts=1 kind=OutgoingSms item=a dur=0\ngarbage\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn screen_events_require_transition() {
        assert!(parse_trace("ts=1 kind=ScreenStatus item=SCREEN dur=0\n").is_err());
        assert!(parse_trace("ts=1 kind=ScreenStatus item=SCREEN dur=0 screen=on\n").is_ok());
        assert!(parse_trace("ts=1 kind=OutgoingSms item=a dur=0 screen=on\n").is_err());
    }

    #[test]
    fn items_with_spaces_and_commas_round_trip() {
        let mut trace = EventTrace::new("tester");
        trace.contact_list.insert("home, sweet".into());
        trace.events.push(Event::new(
            5,
            FeatureKind::WifiHistory,
            "Cafe Guest WiFi",
            120,
        ));
        trace
            .events
            .push(Event::new(9, FeatureKind::BrowserHistory, "a\\b,c d", 3));
        let text = serialize_trace(&trace);
        let back = parse_trace(&text).unwrap();
        assert_eq!(back, trace);
    }

    fn arb_kind() -> impl Strategy<Value = FeatureKind> {
        prop::sample::select(FeatureKind::ALL.to_vec())
    }

    fn arb_event() -> impl Strategy<Value = Event> {
        (
            0u64..10_000_000,
            arb_kind(),
            "[a-zA-Z0-9 ,+.\\\\_-]{1,12}",
            0u64..10_000,
        )
            .prop_map(|(ts, kind, item, dur)| {
                if kind == FeatureKind::ScreenStatus {
                    Event::screen(
                        ts,
                        if dur % 2 == 0 {
                            ScreenTransition::On
                        } else {
                            ScreenTransition::Off
                        },
                        dur,
                    )
                } else {
                    Event::new(ts, kind, item, dur)
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip_preserves_traces(events in prop::collection::vec(arb_event(), 0..40),
                                       owner in "[a-z ,]{1,10}",
                                       contacts in prop::collection::btree_set("[0-9+ ,]{1,8}", 0..5)) {
            let mut trace = EventTrace { owner, events, contact_list: contacts };
            trace.sort_events();
            let text = serialize_trace(&trace);
            let back = parse_trace(&text).unwrap();
            prop_assert_eq!(back, trace);
        }
    }
}
