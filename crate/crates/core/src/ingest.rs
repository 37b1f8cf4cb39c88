//! Meter-reading ingest: CSV parsing, energy-conserving alignment onto a
//! 5-minute grid, day labelling and peak-period window extraction.
//!
//! Power is modelled as piecewise constant: a reading holds from its own
//! timestamp until the next reading (the final reading keeps holding). A grid
//! slot's value is the mean power of that model over the slot's 5-minute
//! cell, so the energy of any run of whole cells equals the integral of the
//! raw step function over the same span.
//!
//! Gridding is done on UTC instants. Every real time zone has an offset that
//! is a multiple of 5 minutes, so UTC 5-minute boundaries coincide with local
//! ones; local clock times only matter when labelling days and cutting peak
//! windows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Timelike, Utc, Weekday};
use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Width of one grid slot.
pub const SLOT_SECONDS: i64 = 300;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("input not found: {0}")]
    NotFound(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{rejected} of {rows} rows rejected, above the allowed fraction {limit}")]
    TooManyRejects { rejected: usize, rows: usize, limit: f64 },
    #[error("household {0}: fewer than 2 readings")]
    TooFewReadings(String),
    #[error("household {0}: readings not strictly increasing in time")]
    Unsorted(String),
    #[error("invalid holiday list line {line}: {content}")]
    BadHoliday { line: usize, content: String },
    #[error("invalid window file line {line}: {reason}")]
    BadWindowRow { line: usize, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawReading {
    pub household_id: String,
    pub timestamp: DateTime<Utc>,
    /// Watts, never negative.
    pub power: f64,
}

/// How the first line of an input file is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    Present,
    Absent,
    /// Skip the first line only when it starts with `household_id`.
    #[default]
    Auto,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub header: HeaderMode,
    /// Hard failure once rejected rows exceed this fraction of all rows.
    pub max_reject_fraction: f64,
    /// Zone used for timestamps that carry no offset.
    pub timezone: Tz,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            header: HeaderMode::Auto,
            max_reject_fraction: 0.10,
            timezone: chrono_tz::Europe::London,
        }
    }
}

/// A row that could not be parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    /// 1-based line number in the source.
    pub line: usize,
    pub content: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    pub readings: Vec<RawReading>,
    pub rejects: Vec<Reject>,
    /// Data rows seen (header excluded, blank lines excluded).
    pub rows: usize,
}

/// Parse one timestamp. Offsets are honoured; naive times are read in `tz`.
pub fn parse_timestamp(text: &str, tz: Tz) -> Result<DateTime<Utc>, String> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Ok(dt.with_timezone(&Utc));
    }
    let naive = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
        .ok_or_else(|| format!("unparseable timestamp `{text}`"))?;
    tz.from_local_datetime(&naive)
        .earliest()
        .map(|dt| dt.with_timezone(&Utc))
        .ok_or_else(|| format!("timestamp `{text}` does not exist in {tz}"))
}

fn parse_row(line: &str, tz: Tz) -> Result<RawReading, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 fields, found {}", fields.len()));
    }
    if fields[0].is_empty() {
        return Err("empty household id".into());
    }
    let timestamp = parse_timestamp(fields[1], tz)?;
    let power: f64 = fields[2]
        .parse()
        .map_err(|_| format!("unparseable power `{}`", fields[2]))?;
    if !power.is_finite() || power < 0.0 {
        return Err(format!("power must be finite and non-negative, got {power}"));
    }
    Ok(RawReading {
        household_id: fields[0].to_string(),
        timestamp,
        power,
    })
}

/// Parse `household_id,timestamp,watts` rows.
///
/// Malformed rows are collected in the report's reject list; the call fails
/// only when they exceed `max_reject_fraction` of the data rows.
pub fn parse_readings<R: BufRead>(source: R, opts: &ParseOptions) -> Result<ParseReport, IngestError> {
    let mut report = ParseReport::default();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if idx == 0 {
            let skip = match opts.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => trimmed.starts_with("household_id"),
            };
            if skip {
                continue;
            }
        }
        if trimmed.is_empty() {
            continue;
        }
        report.rows += 1;
        match parse_row(trimmed, opts.timezone) {
            Ok(r) => report.readings.push(r),
            Err(reason) => report.rejects.push(Reject {
                line: line_no,
                content: trimmed.to_string(),
                reason,
            }),
        }
    }
    if report.rows > 0 {
        let frac = report.rejects.len() as f64 / report.rows as f64;
        if frac > opts.max_reject_fraction {
            return Err(IngestError::TooManyRejects {
                rejected: report.rejects.len(),
                rows: report.rows,
                limit: opts.max_reject_fraction,
            });
        }
    }
    log::info!("parsed {} rows, {} rejected", report.rows, report.rejects.len());
    Ok(report)
}

/// Open a reading file, decompressing when the name ends in `.gz`.
pub fn read_readings_file(path: &Path, opts: &ParseOptions) -> Result<ParseReport, IngestError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IngestError::NotFound(path.display().to_string()),
        _ => IngestError::Io(e),
    })?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        parse_readings(BufReader::new(flate2::read::GzDecoder::new(file)), opts)
    } else {
        parse_readings(BufReader::new(file), opts)
    }
}

/// Write readings in the input CSV format (with header).
pub fn write_readings_csv<W: Write>(mut out: W, readings: &[RawReading]) -> io::Result<()> {
    writeln!(out, "household_id,timestamp,watts")?;
    for r in readings {
        writeln!(
            out,
            "{},{},{}",
            r.household_id,
            r.timestamp.format("%Y-%m-%dT%H:%M:%SZ"),
            r.power
        )?;
    }
    Ok(())
}

/// Group readings per household, sorted by time. Duplicate timestamps keep
/// the first reading in input order.
pub fn group_by_household(readings: Vec<RawReading>) -> BTreeMap<String, Vec<RawReading>> {
    let mut groups: BTreeMap<String, Vec<RawReading>> = BTreeMap::new();
    for r in readings {
        groups.entry(r.household_id.clone()).or_default().push(r);
    }
    for list in groups.values_mut() {
        list.sort_by_key(|r| r.timestamp);
        list.dedup_by_key(|r| r.timestamp);
    }
    groups
}

/// One household's readings on an exact 5-minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries {
    pub household_id: String,
    /// Start of slot 0, on a 5-minute boundary.
    pub grid_start: DateTime<Utc>,
    /// Mean watts per slot.
    pub values: Vec<f64>,
    /// Slots with no raw coverage.
    pub gaps: BTreeSet<usize>,
}

impl AlignedSeries {
    pub fn slot_time(&self, slot: usize) -> DateTime<Utc> {
        self.grid_start + Duration::seconds(slot as i64 * SLOT_SECONDS)
    }

    /// Slot whose cell starts at `t`, if `t` is on the grid and in range.
    pub fn slot_at(&self, t: DateTime<Utc>) -> Option<usize> {
        let offset = (t - self.grid_start).num_seconds();
        if offset < 0 || offset % SLOT_SECONDS != 0 {
            return None;
        }
        let slot = (offset / SLOT_SECONDS) as usize;
        (slot < self.values.len()).then_some(slot)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AlignOptions {
    /// Raw intervals longer than this leave the slots inside them as gaps.
    pub max_gap_seconds: i64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions { max_gap_seconds: 15 * 60 }
    }
}

/// Resample one household's sorted readings onto the 5-minute grid.
///
/// A slot is a gap when its start lies before the first reading, after the
/// last, or strictly inside a raw interval longer than `max_gap_seconds`.
pub fn align_to_grid(readings: &[RawReading], opts: &AlignOptions) -> Result<AlignedSeries, IngestError> {
    let id = readings.first().map(|r| r.household_id.clone()).unwrap_or_default();
    if readings.len() < 2 {
        return Err(IngestError::TooFewReadings(id));
    }
    let times: Vec<i64> = readings.iter().map(|r| r.timestamp.timestamp()).collect();
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IngestError::Unsorted(id));
    }
    let power: Vec<f64> = readings.iter().map(|r| r.power).collect();
    let first = times[0];
    let last = *times.last().unwrap();
    let grid_first = first.div_euclid(SLOT_SECONDS) * SLOT_SECONDS;
    let grid_last = last.div_euclid(SLOT_SECONDS) * SLOT_SECONDS;
    let n_slots = ((grid_last - grid_first) / SLOT_SECONDS + 1) as usize;

    let mut values = Vec::with_capacity(n_slots);
    let mut gaps = BTreeSet::new();
    // index of the reading in force at the current cursor
    let mut idx = 0usize;
    for slot in 0..n_slots {
        let cell_start = grid_first + slot as i64 * SLOT_SECONDS;
        let cell_end = cell_start + SLOT_SECONDS;
        while idx + 1 < times.len() && times[idx + 1] <= cell_start {
            idx += 1;
        }

        let is_gap = if cell_start < first || cell_start > last {
            true
        } else if times[idx] == cell_start {
            false
        } else {
            idx + 1 < times.len() && times[idx + 1] - times[idx] > opts.max_gap_seconds
        };
        if is_gap {
            gaps.insert(slot);
        }

        let mut cursor = cell_start.max(first);
        let mut j = idx;
        let mut pieces = 0usize;
        let mut single = 0.0;
        let mut energy = 0.0;
        while cursor < cell_end {
            let seg_end = match times.get(j + 1) {
                Some(&t) if t < cell_end => t,
                _ => cell_end,
            };
            let dur = (seg_end - cursor) as f64;
            energy += power[j] * dur;
            single = power[j];
            pieces += 1;
            cursor = seg_end;
            if times.get(j + 1) == Some(&cursor) {
                j += 1;
            }
        }
        let covered = (cell_end - cell_start.max(first)) as f64;
        values.push(if pieces == 1 { single } else { energy / covered });
    }

    Ok(AlignedSeries {
        household_id: id,
        grid_start: Utc.timestamp_opt(grid_first, 0).single().expect("grid start in range"),
        values,
        gaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Working,
    Weekend,
    Holiday,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Spring,
    Summer,
    Autumn,
    Winter,
}

impl Season {
    pub fn of_month(month: u32) -> Season {
        match month {
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            9..=11 => Season::Autumn,
            _ => Season::Winter,
        }
    }
}

macro_rules! str_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(format!("unknown {} `{other}`", stringify!($ty))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self { $(v if *v == $variant => $name,)+ _ => unreachable!() };
                f.write_str(name)
            }
        }
    };
}

str_enum!(DayType { "working" => DayType::Working, "weekend" => DayType::Weekend, "holiday" => DayType::Holiday });
str_enum!(Season {
    "spring" => Season::Spring,
    "summer" => Season::Summer,
    "autumn" => Season::Autumn,
    "winter" => Season::Winter,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayLabel {
    pub date: NaiveDate,
    pub day_type: DayType,
    pub season: Season,
}

pub fn label_day(date: NaiveDate, holidays: &BTreeSet<NaiveDate>) -> DayLabel {
    let day_type = if holidays.contains(&date) {
        DayType::Holiday
    } else if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
        DayType::Weekend
    } else {
        DayType::Working
    };
    DayLabel {
        date,
        day_type,
        season: Season::of_month(date.month()),
    }
}

pub fn label_days<'a>(
    dates: impl IntoIterator<Item = &'a NaiveDate>,
    holidays: &BTreeSet<NaiveDate>,
) -> BTreeMap<NaiveDate, DayLabel> {
    dates.into_iter().map(|&d| (d, label_day(d, holidays))).collect()
}

/// Scottish bank holidays for 2011, in the format read by [`parse_holidays`].
pub const SCOTLAND_2011_HOLIDAYS: &str = include_str!("../data/holidays-scotland-2011.txt");

/// The bundled 2011 Scottish holiday set.
pub fn scotland_2011_holidays() -> BTreeSet<NaiveDate> {
    parse_holidays(SCOTLAND_2011_HOLIDAYS).expect("bundled holiday list parses")
}

/// Parse a holiday list: one ISO date per line, `#` starts a comment.
pub fn parse_holidays(text: &str) -> Result<BTreeSet<NaiveDate>, IngestError> {
    let mut out = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|_| IngestError::BadHoliday {
            line: idx + 1,
            content: raw.to_string(),
        })?;
        out.insert(date);
    }
    Ok(out)
}

/// Which days and which clock span to cut out of each series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFilter {
    pub season: Option<Season>,
    pub day_type: Option<DayType>,
    pub peak_start: NaiveTime,
    pub peak_end: NaiveTime,
}

impl Default for PeakFilter {
    fn default() -> Self {
        PeakFilter {
            season: Some(Season::Spring),
            day_type: Some(DayType::Working),
            peak_start: NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            peak_end: NaiveTime::from_hms_opt(20, 0, 0).unwrap(),
        }
    }
}

impl PeakFilter {
    pub fn validate(&self) -> Result<(), IngestError> {
        let on_grid = |t: NaiveTime| t.num_seconds_from_midnight() as i64 % SLOT_SECONDS == 0;
        if self.peak_start >= self.peak_end {
            return Err(IngestError::Config("peak start must precede peak end".into()));
        }
        if !on_grid(self.peak_start) || !on_grid(self.peak_end) {
            return Err(IngestError::Config("peak bounds must lie on 5-minute boundaries".into()));
        }
        Ok(())
    }

    /// Readings per window, both ends included (49 for 16:00-20:00).
    pub fn readings_per_window(&self) -> usize {
        ((self.peak_end - self.peak_start).num_seconds() / SLOT_SECONDS) as usize + 1
    }

    fn accepts(&self, label: &DayLabel) -> bool {
        self.season.is_none_or(|s| s == label.season) && self.day_type.is_none_or(|d| d == label.day_type)
    }
}

/// One household's readings over the peak period of one day.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakDayWindow {
    pub household_id: String,
    pub date: NaiveDate,
    /// Watts at each 5-minute step from peak start to peak end inclusive.
    pub readings: Vec<f64>,
    /// False when any reading falls on a gap or outside the series.
    pub valid: bool,
}

/// Local calendar dates touched by a series.
pub fn series_dates(series: &AlignedSeries, tz: Tz) -> BTreeSet<NaiveDate> {
    if series.values.is_empty() {
        return BTreeSet::new();
    }
    let first = series.grid_start.with_timezone(&tz).date_naive();
    let last = series.slot_time(series.values.len() - 1).with_timezone(&tz).date_naive();
    first.iter_days().take_while(|d| *d <= last).collect()
}

/// Cut one window per labelled date that passes the filter.
pub fn extract_peak_windows(
    series: &AlignedSeries,
    labels: &BTreeMap<NaiveDate, DayLabel>,
    filter: &PeakFilter,
    tz: Tz,
) -> Vec<PeakDayWindow> {
    let n = filter.readings_per_window();
    let mut out = Vec::new();
    for date in series_dates(series, tz) {
        let Some(label) = labels.get(&date) else { continue };
        if !filter.accepts(label) {
            continue;
        }
        let mut readings = Vec::with_capacity(n);
        let mut valid = true;
        for k in 0..n {
            let local = date.and_time(filter.peak_start) + Duration::seconds(k as i64 * SLOT_SECONDS);
            let slot = tz
                .from_local_datetime(&local)
                .earliest()
                .and_then(|t| series.slot_at(t.with_timezone(&Utc)));
            match slot {
                Some(s) => {
                    if series.gaps.contains(&s) {
                        valid = false;
                    }
                    readings.push(series.values[s]);
                }
                None => {
                    valid = false;
                    readings.push(0.0);
                }
            }
        }
        out.push(PeakDayWindow {
            household_id: series.household_id.clone(),
            date,
            readings,
            valid,
        });
    }
    out
}

/// Households with at least `min_days` valid windows.
pub fn filter_households(
    windows: &BTreeMap<String, Vec<PeakDayWindow>>,
    min_days: usize,
) -> BTreeSet<String> {
    windows
        .iter()
        .filter(|(_, ws)| ws.iter().filter(|w| w.valid).count() >= min_days)
        .map(|(id, _)| id.clone())
        .collect()
}

/// Everything needed to go from raw readings to peak windows.
#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub align: AlignOptions,
    pub filter: PeakFilter,
    pub holidays: BTreeSet<NaiveDate>,
    pub timezone: Tz,
    pub min_days: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            align: AlignOptions::default(),
            filter: PeakFilter::default(),
            holidays: scotland_2011_holidays(),
            timezone: chrono_tz::Europe::London,
            min_days: 4,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOutcome {
    /// Peak windows of retained households, by household id.
    pub windows: BTreeMap<String, Vec<PeakDayWindow>>,
    /// Households dropped, with the reason.
    pub dropped: Vec<(String, String)>,
}

/// Align, label and window every household, then apply the minimum-days rule.
pub fn ingest(readings: Vec<RawReading>, config: &IngestConfig) -> Result<IngestOutcome, IngestError> {
    config.filter.validate()?;
    let groups: Vec<(String, Vec<RawReading>)> = group_by_household(readings).into_iter().collect();
    let per_household: Vec<(String, Result<Vec<PeakDayWindow>, IngestError>)> = groups
        .into_par_iter()
        .map(|(id, rs)| {
            let res = align_to_grid(&rs, &config.align).map(|series| {
                let dates = series_dates(&series, config.timezone);
                let labels = label_days(&dates, &config.holidays);
                extract_peak_windows(&series, &labels, &config.filter, config.timezone)
            });
            (id, res)
        })
        .collect();

    let mut outcome = IngestOutcome::default();
    let mut all = BTreeMap::new();
    for (id, res) in per_household {
        match res {
            Ok(ws) => {
                all.insert(id, ws);
            }
            Err(e) => {
                log::warn!("dropping household {id}: {e}");
                outcome.dropped.push((id, e.to_string()));
            }
        }
    }
    let keep = filter_households(&all, config.min_days);
    for (id, ws) in all {
        if keep.contains(&id) {
            outcome.windows.insert(id, ws);
        } else {
            let valid = ws.iter().filter(|w| w.valid).count();
            outcome
                .dropped
                .push((id, format!("{valid} valid days, fewer than {}", config.min_days)));
        }
    }
    Ok(outcome)
}

/// Write windows as `household_id,date,valid,r00..rNN`.
pub fn write_windows_csv<W: Write>(mut out: W, windows: &BTreeMap<String, Vec<PeakDayWindow>>) -> io::Result<()> {
    let width = windows.values().flatten().map(|w| w.readings.len()).max().unwrap_or(49);
    write!(out, "household_id,date,valid")?;
    for i in 0..width {
        write!(out, ",r{i:02}")?;
    }
    writeln!(out)?;
    for w in windows.values().flatten() {
        write!(out, "{},{},{}", w.household_id, w.date, u8::from(w.valid))?;
        for v in &w.readings {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_windows_csv<R: BufRead>(source: R) -> Result<BTreeMap<String, Vec<PeakDayWindow>>, IngestError> {
    let mut out: BTreeMap<String, Vec<PeakDayWindow>> = BTreeMap::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| IngestError::BadWindowRow { line: idx + 1, reason };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(bad("too few fields".into()));
        }
        let date = NaiveDate::parse_from_str(fields[1], "%Y-%m-%d").map_err(|e| bad(e.to_string()))?;
        let valid = match fields[2] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("bad valid flag `{other}`"))),
        };
        let readings = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        out.entry(fields[0].to_string()).or_default().push(PeakDayWindow {
            household_id: fields[0].to_string(),
            date,
            readings,
            valid,
        });
    }
    Ok(out)
}
