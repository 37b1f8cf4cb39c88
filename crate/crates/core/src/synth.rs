//! Synthetic households with known behavioural archetypes.
//!
//! Every household has a flat base load plus a few rectangular consumption
//! events per day. Each event slot has a fixed anchor clock time per
//! household; on every day the actual start is the anchor plus Gaussian
//! jitter with the archetype's standard deviation, redrawn until the event
//! fits inside the anchor window. Readings sample the instantaneous power
//! every five minutes over a daily window around the evening peak, with a
//! small multiplicative noise.
//!
//! Scenarios are TOML files:
//!
//! ```toml
//! seed = 7
//! start_date = "2011-03-01"
//! days = 60
//!
//! [[archetype]]
//! name = "regular"
//! households = 30
//! base_load = 150.0
//! events_per_day = [1, 1]
//! event_height = [500.0, 1000.0]
//! event_duration = [30.0, 60.0]
//! timing_jitter_sd = 5.0
//! ```
//!
//! Unlisted keys take the defaults of [`Scenario`] and [`ArchetypeSpec`].

use std::collections::BTreeSet;
use std::io::{self, Write};

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, TimeZone, Utc, Weekday};
use chrono_tz::Tz;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{scotland_2011_holidays, RawReading, SLOT_SECONDS};
use crate::rng::{stream_rng, streams};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn default_base_load() -> f64 {
    150.0
}
fn default_events() -> (u32, u32) {
    (1, 1)
}
fn default_height() -> (f64, f64) {
    (500.0, 1000.0)
}
fn default_duration() -> (f64, f64) {
    (30.0, 60.0)
}
// Inside the 16:00-20:00 peak with room for a full motif window before the
// step up and after the step down.
fn default_anchor_window() -> (String, String) {
    ("16:30".into(), "19:50".into())
}

/// One behavioural group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeSpec {
    pub name: String,
    pub households: usize,
    #[serde(default = "default_base_load")]
    pub base_load: f64,
    /// Inclusive range of events per day.
    #[serde(default = "default_events")]
    pub events_per_day: (u32, u32),
    /// Per-household event height is drawn uniformly from this range (watts).
    #[serde(default = "default_height")]
    pub event_height: (f64, f64),
    /// Per-household event duration range (minutes), rounded to whole
    /// five-minute intervals.
    #[serde(default = "default_duration")]
    pub event_duration: (f64, f64),
    /// Day-to-day spread of event start times (minutes).
    pub timing_jitter_sd: f64,
    /// Local clock range that anchors and jittered events must fall in.
    #[serde(default = "default_anchor_window")]
    pub anchor_window: (String, String),
    /// Standard deviation of a per-day multiplicative factor on event
    /// heights, which varies the daily total independently of timing.
    #[serde(default)]
    pub usage_scale_sd: f64,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2011, 3, 1).unwrap()
}
fn default_days() -> usize {
    60
}
fn default_window() -> (String, String) {
    ("15:30".into(), "20:30".into())
}
fn default_timezone() -> String {
    "Europe/London".into()
}
fn default_noise() -> f64 {
    0.02
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    /// Number of generated days.
    #[serde(default = "default_days")]
    pub days: usize,
    /// Generate only on weekdays that are not bundled Scottish holidays.
    #[serde(default = "default_true")]
    pub working_days_only: bool,
    /// Local clock range covered by readings each day.
    #[serde(default = "default_window")]
    pub reading_window: (String, String),
    #[serde(default = "default_timezone")]
    pub timezone: String,
    /// Half-width of the uniform multiplicative reading noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(rename = "archetype")]
    pub archetypes: Vec<ArchetypeSpec>,
}

fn parse_clock(s: &str) -> Result<NaiveTime, SynthError> {
    NaiveTime::parse_from_str(s, "%H:%M").map_err(|_| SynthError::Invalid(format!("bad clock time `{s}`")))
}

fn minutes_of(t: NaiveTime) -> f64 {
    f64::from(t.hour() * 60 + t.minute())
}

use chrono::Timelike;

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, SynthError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.archetypes.is_empty() {
            return bad("no archetypes".into());
        }
        if self.days == 0 {
            return bad("days must be positive".into());
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1)", self.noise));
        }
        self.tz()?;
        let (ws, we) = self.window()?;
        if we <= ws {
            return bad("reading window ends before it starts".into());
        }
        let mut names = BTreeSet::new();
        for a in &self.archetypes {
            if !names.insert(&a.name) {
                return bad(format!("duplicate archetype `{}`", a.name));
            }
            if a.name.is_empty() || a.name.contains([',', '\n']) {
                return bad(format!("archetype name `{}` not usable as an id", a.name));
            }
            if a.timing_jitter_sd < 0.0 || a.usage_scale_sd < 0.0 || a.base_load < 0.0 {
                return bad(format!("{}: negative sd or base load", a.name));
            }
            if a.events_per_day.0 > a.events_per_day.1 {
                return bad(format!("{}: events_per_day range reversed", a.name));
            }
            for (lo, hi, what) in [
                (a.event_height.0, a.event_height.1, "event_height"),
                (a.event_duration.0, a.event_duration.1, "event_duration"),
            ] {
                if !(lo >= 0.0 && lo <= hi) {
                    return bad(format!("{}: bad {what} range", a.name));
                }
            }
            let (s, e) = (parse_clock(&a.anchor_window.0)?, parse_clock(&a.anchor_window.1)?);
            if minutes_of(e) - minutes_of(s) < a.event_duration.1 {
                return bad(format!("{}: anchor window shorter than the longest event", a.name));
            }
            if s < ws || e > we {
                return bad(format!("{}: anchor window outside the reading window", a.name));
            }
        }
        Ok(())
    }

    fn tz(&self) -> Result<Tz, SynthError> {
        self.timezone
            .parse()
            .map_err(|_| SynthError::Invalid(format!("unknown timezone `{}`", self.timezone)))
    }

    fn window(&self) -> Result<(NaiveTime, NaiveTime), SynthError> {
        Ok((parse_clock(&self.reading_window.0)?, parse_clock(&self.reading_window.1)?))
    }

    /// The calendar dates readings are generated for.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let holidays = scotland_2011_holidays();
        let mut out = Vec::with_capacity(self.days);
        let mut d = self.start_date;
        while out.len() < self.days {
            let weekend = matches!(d.weekday(), Weekday::Sat | Weekday::Sun);
            if !self.working_days_only || (!weekend && !holidays.contains(&d)) {
                out.push(d);
            }
            d += Duration::days(1);
        }
        out
    }

    pub fn household_count(&self) -> usize {
        self.archetypes.iter().map(|a| a.households).sum()
    }
}

/// Household id to archetype name, in generation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<(String, String)>,
}

impl GroundTruth {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "household_id,archetype")?;
        for (h, a) in &self.labels {
            writeln!(out, "{h},{a}")?;
        }
        Ok(())
    }

    /// Archetype index (1-based, in order of first appearance) for each of
    /// `ids`; `None` for unknown ids.
    pub fn label_indices(&self, ids: &[String]) -> Vec<Option<usize>> {
        let mut names: Vec<&str> = Vec::new();
        for (_, a) in &self.labels {
            if !names.contains(&a.as_str()) {
                names.push(a);
            }
        }
        ids.iter()
            .map(|id| {
                self.labels
                    .iter()
                    .find(|(h, _)| h == id)
                    .and_then(|(_, a)| names.iter().position(|n| n == a))
                    .map(|i| i + 1)
            })
            .collect()
    }
}

/// A single generated event, kept for checking the generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub day: usize,
    /// Local clock minute of the step up.
    pub start_minute: f64,
    pub duration: f64,
    pub height: f64,
}

/// Fixed traits of one household.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdPlan {
    pub id: String,
    pub archetype: String,
    pub anchors: Vec<f64>,
    pub height: f64,
    pub duration: f64,
    pub events: Vec<Event>,
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draw the household's traits and every day's events.
pub fn plan_household(spec: &ArchetypeSpec, id: String, days: usize, rng: &mut impl Rng) -> Result<HouseholdPlan, SynthError> {
    let lo = minutes_of(parse_clock(&spec.anchor_window.0)?);
    let hi = minutes_of(parse_clock(&spec.anchor_window.1)?);
    let height = uniform(rng, spec.event_height);
    // whole reading intervals, so every event covers the same number of samples
    let step = SLOT_SECONDS as f64 / 60.0;
    let duration = ((uniform(rng, spec.event_duration) / step).round() * step).max(step);
    let latest = hi - duration;
    let slots = spec.events_per_day.1 as usize;
    // anchors spread over equal sub-ranges so events of one day rarely collide
    let width = (latest - lo) / slots.max(1) as f64;
    let anchors: Vec<f64> = (0..slots)
        .map(|j| lo + width * (j as f64 + rng.random_range(0.25..0.75)))
        .collect();
    let jitter = Normal::new(0.0, spec.timing_jitter_sd.max(f64::MIN_POSITIVE)).expect("finite sd");
    let scale = Normal::new(1.0, spec.usage_scale_sd.max(f64::MIN_POSITIVE)).expect("finite sd");
    let mut events = Vec::new();
    for day in 0..days {
        let count = rng.random_range(spec.events_per_day.0..=spec.events_per_day.1) as usize;
        let factor = if spec.usage_scale_sd > 0.0 { scale.sample(rng).max(0.1) } else { 1.0 };
        for &anchor in anchors.iter().take(count) {
            let start = if spec.timing_jitter_sd > 0.0 {
                let mut s = anchor + jitter.sample(rng);
                let mut tries = 0;
                while !(lo..=latest).contains(&s) && tries < 1000 {
                    s = anchor + jitter.sample(rng);
                    tries += 1;
                }
                s.clamp(lo, latest)
            } else {
                anchor
            };
            events.push(Event {
                day,
                start_minute: start,
                duration,
                height: height * factor,
            });
        }
    }
    Ok(HouseholdPlan {
        id,
        archetype: spec.name.clone(),
        anchors,
        height,
        duration,
        events,
    })
}

/// Event power drawn at local minute `t` of one day.
fn event_power_at(events: &[Event], t: f64) -> f64 {
    events
        .iter()
        .filter(|e| e.start_minute <= t && t < e.start_minute + e.duration)
        .map(|e| e.height)
        .sum()
}

/// Readings for one planned household.
pub fn render_household(
    plan: &HouseholdPlan,
    base_load: f64,
    scenario: &Scenario,
    dates: &[NaiveDate],
    rng: &mut impl Rng,
) -> Result<Vec<RawReading>, SynthError> {
    let tz = scenario.tz()?;
    let (ws, we) = scenario.window()?;
    let step = SLOT_SECONDS as f64 / 60.0;
    let cells = ((minutes_of(we) - minutes_of(ws)) / step) as usize;
    let mut out = Vec::with_capacity(dates.len() * (cells + 1));
    let mut by_day: Vec<Vec<Event>> = vec![Vec::new(); dates.len()];
    for e in &plan.events {
        by_day[e.day].push(*e);
    }
    for (day, date) in dates.iter().enumerate() {
        let local = date.and_time(ws);
        let Some(start) = tz.from_local_datetime(&local).earliest() else {
            return Err(SynthError::Invalid(format!("{date} {ws} does not exist in {tz}")));
        };
        let start = start.with_timezone(&Utc);
        for c in 0..=cells {
            let a = minutes_of(ws) + c as f64 * step;
            let power = base_load + event_power_at(&by_day[day], a);
            let noisy = if scenario.noise > 0.0 {
                power * (1.0 + rng.random_range(-scenario.noise..=scenario.noise))
            } else {
                power
            };
            out.push(RawReading {
                household_id: plan.id.clone(),
                timestamp: start + Duration::seconds(c as i64 * SLOT_SECONDS),
                power: noisy.max(0.0),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub readings: Vec<RawReading>,
    pub truth: GroundTruth,
    pub plans: Vec<HouseholdPlan>,
}

/// Generate every household of the scenario. Household `i` (in archetype
/// order) draws from its own random stream, so the output does not depend
/// on thread scheduling.
pub fn generate(scenario: &Scenario) -> Result<Generated, SynthError> {
    scenario.validate()?;
    let dates = scenario.dates();
    let mut jobs = Vec::new();
    for spec in &scenario.archetypes {
        for h in 0..spec.households {
            jobs.push((spec, format!("{}-{:03}", spec.name, h + 1)));
        }
    }
    let rendered: Vec<(HouseholdPlan, Vec<RawReading>)> = jobs
        .into_par_iter()
        .enumerate()
        .map(|(i, (spec, id))| {
            let mut rng = stream_rng(scenario.seed, streams::SYNTH_BASE + i as u64);
            let plan = plan_household(spec, id, dates.len(), &mut rng)?;
            let readings = render_household(&plan, spec.base_load, scenario, &dates, &mut rng)?;
            Ok((plan, readings))
        })
        .collect::<Result<_, SynthError>>()?;
    let mut out = Generated {
        readings: Vec::new(),
        truth: GroundTruth::default(),
        plans: Vec::new(),
    };
    for (plan, readings) in rendered {
        out.truth.labels.push((plan.id.clone(), plan.archetype.clone()));
        out.readings.extend(readings);
        out.plans.push(plan);
    }
    Ok(out)
}
