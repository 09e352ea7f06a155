//! Seeded synthetic trace generation.
//!
//! Produces weeks of plausible device usage for one profile: screen sessions
//! bracketing foreground activity, plus Poisson background arrivals. Item
//! popularity is Zipf-skewed so ranking lists have structure to learn, and
//! each item gets its own typical duration so duration statistics are
//! informative.

use rand::prelude::*;
use rand::rngs::StdRng;
use rand_distr::{Distribution, Exp, Normal, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use super::{Event, EventTrace, FeatureKind, ScreenTransition};

const DAY_SECS: u64 = 86_400;

/// Size and skew of an identifier pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub size: usize,
    pub zipf_exponent: f64,
}

impl PoolSpec {
    pub fn new(size: usize, zipf_exponent: f64) -> PoolSpec {
        PoolSpec {
            size,
            zipf_exponent,
        }
    }
}

/// Parameters for one synthetic user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticProfile {
    pub seed: u64,
    pub contact_pool: PoolSpec,
    pub app_pool: PoolSpec,
    pub wifi_pool_size: usize,
    pub browser_pool_size: usize,
    /// Mean screen sessions per day (Poisson).
    pub sessions_per_day: f64,
    /// Session length in seconds (normal, clamped).
    pub session_length_mean: f64,
    pub session_length_stddev: f64,
    /// Background arrival rates, events per hour.
    pub wifi_per_hour: f64,
    pub incoming_sms_per_hour: f64,
    pub incoming_call_per_hour: f64,
    pub day_count: u32,
}

impl Default for SyntheticProfile {
    fn default() -> SyntheticProfile {
        SyntheticProfile {
            seed: 0,
            contact_pool: PoolSpec::new(12, 1.1),
            app_pool: PoolSpec::new(15, 1.0),
            wifi_pool_size: 3,
            browser_pool_size: 12,
            sessions_per_day: 30.0,
            session_length_mean: 240.0,
            session_length_stddev: 150.0,
            wifi_per_hour: 0.4,
            incoming_sms_per_hour: 0.7,
            incoming_call_per_hour: 0.25,
            day_count: 28,
        }
    }
}

impl SyntheticProfile {
    pub fn validate(&self) -> crate::error::Result<()> {
        let mut problems = Vec::new();
        if self.contact_pool.size < 1
            || self.app_pool.size < 1
            || self.wifi_pool_size < 1
            || self.browser_pool_size < 1
        {
            problems.push("pool sizes must be >= 1");
        }
        if self.day_count < 1 {
            problems.push("day_count must be >= 1");
        }
        if self.sessions_per_day < 0.0
            || self.wifi_per_hour < 0.0
            || self.incoming_sms_per_hour < 0.0
            || self.incoming_call_per_hour < 0.0
        {
            problems.push("rates must be >= 0");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(crate::error::Error::Config(problems.join("; ")))
        }
    }
}

/// An identifier pool with per-item typical durations.
struct Pool {
    items: Vec<String>,
    duration_means: Vec<f64>,
    zipf: Option<Zipf<f64>>,
}

impl Pool {
    fn build(
        rng: &mut StdRng,
        prefix: &str,
        size: usize,
        zipf_exponent: Option<f64>,
        base_duration: f64,
    ) -> Pool {
        let items: Vec<String> = (0..size).map(|i| format!("{prefix}{i}")).collect();
        let duration_means: Vec<f64> = (0..size)
            .map(|_| base_duration * rng.gen_range(0.6..1.6))
            .collect();
        let zipf = zipf_exponent.and_then(|s| Zipf::new(size as u64, s).ok());
        Pool {
            items,
            duration_means,
            zipf,
        }
    }

    fn pick(&self, rng: &mut StdRng) -> usize {
        match &self.zipf {
            Some(z) => (z.sample(rng) as usize - 1).min(self.items.len() - 1),
            None => rng.gen_range(0..self.items.len()),
        }
    }

    /// Durations are tight around the item's own mean, so a profile's usual
    /// durations are learnable while a stranger's stand out.
    fn duration(&self, rng: &mut StdRng, idx: usize) -> u64 {
        let mean = self.duration_means[idx];
        let sd = 0.22 * mean;
        let d = Normal::new(mean, sd).map(|n| n.sample(rng)).unwrap_or(mean);
        d.clamp(1.0, mean * 3.0) as u64
    }
}

fn poisson_count(rng: &mut StdRng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda)
        .map(|p| p.sample(rng) as u64)
        .unwrap_or(0)
}

/// Generate a deterministic synthetic trace for a validated profile.
pub fn generate_trace(profile: &SyntheticProfile) -> EventTrace {
    let mut rng = StdRng::seed_from_u64(profile.seed);
    let mut trace = EventTrace::new(format!("synthetic-{}", profile.seed));

    let contacts = Pool::build(
        &mut rng,
        "+4477",
        profile.contact_pool.size,
        Some(profile.contact_pool.zipf_exponent),
        140.0,
    );
    let apps = Pool::build(
        &mut rng,
        "app.",
        profile.app_pool.size,
        Some(profile.app_pool.zipf_exponent),
        60.0,
    );
    let wifi = Pool::build(&mut rng, "wifi-", profile.wifi_pool_size, None, 3000.0);
    let sites = Pool::build(&mut rng, "site-", profile.browser_pool_size, None, 45.0);

    trace.contact_list = contacts.items.iter().cloned().collect();

    let session_gap = Exp::new(1.0 / 12.0).expect("positive rate");

    for day in 0..profile.day_count as u64 {
        let day_start = day * DAY_SECS;

        // Screen sessions with their foreground activity.
        let n_sessions = poisson_count(&mut rng, profile.sessions_per_day);
        let mut starts: Vec<u64> = (0..n_sessions)
            .map(|_| day_start + rng.gen_range(0..DAY_SECS.saturating_sub(60)))
            .collect();
        starts.sort_unstable();
        let mut prev_end = day_start;
        for raw_start in starts {
            let start = raw_start.max(prev_end + 60);
            let len = Normal::new(profile.session_length_mean, profile.session_length_stddev)
                .map(|n| n.sample(&mut rng))
                .unwrap_or(profile.session_length_mean)
                .clamp(30.0, profile.session_length_mean * 4.0 + 60.0) as u64;
            let end = (start + len).min(day_start + DAY_SECS - 1);
            if end <= start + 30 {
                continue;
            }
            prev_end = end;

            trace
                .events
                .push(Event::screen(start, ScreenTransition::On, 0));
            let mut t = start + 1;
            while t < end {
                let roll: f64 = rng.gen();
                let (kind, pool) = if roll < 0.50 {
                    (FeatureKind::ApplicationHistory, &apps)
                } else if roll < 0.75 {
                    (FeatureKind::BrowserHistory, &sites)
                } else if roll < 0.87 {
                    (FeatureKind::OutgoingSms, &contacts)
                } else {
                    (FeatureKind::OutgoingCall, &contacts)
                };
                let idx = pool.pick(&mut rng);
                let dur = if kind == FeatureKind::OutgoingSms {
                    0
                } else {
                    pool.duration(&mut rng, idx).min(end - t)
                };
                trace
                    .events
                    .push(Event::new(t, kind, pool.items[idx].clone(), dur));
                let advance = dur.max(5) + session_gap.sample(&mut rng) as u64;
                t += advance.max(5);
            }
            trace
                .events
                .push(Event::screen(end, ScreenTransition::Off, end - start));
        }

        // Background arrivals over the whole day.
        for (kind, rate) in [
            (FeatureKind::WifiHistory, profile.wifi_per_hour),
            (FeatureKind::IncomingSms, profile.incoming_sms_per_hour),
            (FeatureKind::IncomingCall, profile.incoming_call_per_hour),
        ] {
            let count = poisson_count(&mut rng, rate * 24.0);
            for _ in 0..count {
                let t = day_start + rng.gen_range(0..DAY_SECS);
                let (pool, dur) = match kind {
                    FeatureKind::WifiHistory => {
                        let idx = wifi.pick(&mut rng);
                        (idx, wifi.duration(&mut rng, idx))
                    }
                    FeatureKind::IncomingCall => {
                        let idx = contacts.pick(&mut rng);
                        (idx, contacts.duration(&mut rng, idx))
                    }
                    _ => (contacts.pick(&mut rng), 0),
                };
                let item = match kind {
                    FeatureKind::WifiHistory => wifi.items[pool].clone(),
                    _ => contacts.items[pool].clone(),
                };
                trace.events.push(Event::new(t, kind, item, dur));
            }
        }
    }

    trace.sort_events();
    trace
}
