//! Per-household motif catalogues and the three feature representations:
//! motif variability (8 attributes), average peak load profile (one
//! attribute per 5-minute slot) and the two non-motif variability measures.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterError, FeatureMatrix};
use crate::ingest::PeakDayWindow;
use crate::sax::{self, MotifWord, SaxError, SaxParams, WindowOccurrence};

/// Minutes between consecutive readings.
const SLOT_MINUTES: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error(transparent)]
    Sax(#[from] SaxError),
    #[error(transparent)]
    Matrix(#[from] ClusterError),
    #[error("household {0} has no valid windows")]
    NoValidDays(String),
}

/// When and where one motif word was seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occurrence {
    pub date: NaiveDate,
    /// Minutes after peak start.
    pub start_clock: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MotifCatalog {
    pub household_id: String,
    pub entries: BTreeMap<MotifWord, Vec<Occurrence>>,
    /// Valid days the household contributed.
    pub days_sampled: usize,
}

/// Group occurrences by word, each list sorted by (date, start).
pub fn build_catalog(household_id: &str, occurrences: &[WindowOccurrence], days_sampled: usize) -> MotifCatalog {
    let mut entries: BTreeMap<MotifWord, Vec<Occurrence>> = BTreeMap::new();
    for o in occurrences {
        entries.entry(o.word.clone()).or_default().push(Occurrence {
            date: o.date,
            start_clock: o.start_clock,
        });
    }
    for list in entries.values_mut() {
        list.sort();
    }
    MotifCatalog {
        household_id: household_id.to_string(),
        entries,
        days_sampled,
    }
}

/// Position of the odd symbol if every other symbol is identical.
pub fn spike_position(word: &MotifWord) -> Option<usize> {
    let s = word.as_str().as_bytes();
    if s.len() < 3 {
        return None;
    }
    // the baseline is whichever symbol appears at least twice in the first three
    let base = if s[0] == s[1] || s[0] == s[2] { s[0] } else { s[1] };
    let odd: Vec<usize> = (0..s.len()).filter(|&i| s[i] != base).collect();
    match odd.as_slice() {
        [i] => Some(*i),
        _ => None,
    }
}

/// Collapse single-spike families onto their canonical member.
///
/// A single step in an otherwise quiet stretch yields the words
/// `bbbbbe`, `bbbbeb`, ... `ebbbbb` as the window slides past it. Only the
/// member with the spike in the last position (the first window to see the
/// step) is kept; the other members and their occurrences are dropped.
pub fn exclude_trivial(catalog: &MotifCatalog) -> MotifCatalog {
    let entries = catalog
        .entries
        .iter()
        .filter(|(word, _)| match spike_position(word) {
            Some(pos) => pos + 1 == word.len(),
            None => true,
        })
        .map(|(w, occ)| (w.clone(), occ.clone()))
        .collect();
    MotifCatalog {
        household_id: catalog.household_id.clone(),
        entries,
        days_sampled: catalog.days_sampled,
    }
}

/// Population standard deviation; 0 for a single value, `None` when empty.
pub fn population_sd(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Spread of start times in minutes. Values are summed in sorted order so
/// the result does not depend on the order occurrences were collected in.
pub fn timing_sd(start_minutes: &[f64]) -> Option<f64> {
    let mut sorted = start_minutes.to_vec();
    sorted.sort_by(f64::total_cmp);
    population_sd(&sorted)
}

/// The eight motif-variability attributes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotifFeatures {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    pub f5: f64,
    pub f6: f64,
    pub f7: f64,
    pub f8: f64,
}

impl MotifFeatures {
    pub const COLUMNS: [&'static str; 8] = ["f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.f1, self.f2, self.f3, self.f4, self.f5, self.f6, self.f7, self.f8]
    }
}

/// Words ranked by occurrence count, ties by word.
pub fn ranked_motifs(catalog: &MotifCatalog) -> Vec<(&MotifWord, &Vec<Occurrence>)> {
    let mut ranked: Vec<_> = catalog.entries.iter().collect();
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));
    ranked
}

/// Minimum distinct days for a motif to count as regular: ceil(30% of days).
pub fn regular_day_threshold(days_sampled: usize) -> usize {
    (3 * days_sampled).div_ceil(10)
}

/// Attributes of a catalogue that has already been through [`exclude_trivial`].
pub fn motif_features(catalog: &MotifCatalog) -> MotifFeatures {
    let ranked = ranked_motifs(catalog);
    let slot = |i: usize| -> (f64, f64) {
        ranked.get(i).map_or((0.0, 0.0), |(_, occ)| {
            let times: Vec<f64> = occ.iter().map(|o| o.start_clock as f64).collect();
            (occ.len() as f64, timing_sd(&times).unwrap_or(0.0))
        })
    };
    let (f1, f2) = slot(0);
    let (f3, f4) = slot(1);
    let (f5, f6) = slot(2);
    let f7 = catalog.entries.values().filter(|o| o.len() >= 2).count() as f64;
    let need = regular_day_threshold(catalog.days_sampled);
    let f8 = catalog
        .entries
        .values()
        .filter(|occ| occ.iter().map(|o| o.date).collect::<BTreeSet<_>>().len() >= need.max(1))
        .count() as f64;
    MotifFeatures { f1, f2, f3, f4, f5, f6, f7, f8 }
}

/// Slot-wise mean over days, dropping the closing reading of each window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFeatures {
    pub values: Vec<f64>,
}

pub fn profile_features(windows: &[PeakDayWindow]) -> ProfileFeatures {
    let valid: Vec<&PeakDayWindow> = windows.iter().filter(|w| w.valid).collect();
    let width = valid.first().map_or(0, |w| w.readings.len().saturating_sub(1));
    let mut sums = vec![0.0; width];
    for w in &valid {
        for (s, v) in sums.iter_mut().zip(&w.readings) {
            *s += v;
        }
    }
    let n = valid.len().max(1) as f64;
    ProfileFeatures {
        values: sums.into_iter().map(|s| s / n).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonMotifFeatures {
    /// Spread (minutes) of the daily time of maximum usage.
    pub time_of_max_sd: f64,
    /// Spread of the daily peak-period total, in watt x 5-minute units.
    pub daily_total_sd: f64,
}

impl NonMotifFeatures {
    pub const COLUMNS: [&'static str; 2] = ["tmax_sd", "total_sd"];
}

/// Both measures use the same cells as the load profile (the closing reading
/// of each window is excluded). The earliest slot wins ties for the maximum.
pub fn nonmotif_features(windows: &[PeakDayWindow]) -> NonMotifFeatures {
    let mut argmax_minutes = Vec::new();
    let mut totals = Vec::new();
    for w in windows.iter().filter(|w| w.valid) {
        let cells = &w.readings[..w.readings.len().saturating_sub(1)];
        let mut best = 0;
        for (i, &v) in cells.iter().enumerate() {
            if v > cells[best] {
                best = i;
            }
        }
        argmax_minutes.push(best as f64 * SLOT_MINUTES);
        totals.push(cells.iter().sum::<f64>());
    }
    NonMotifFeatures {
        time_of_max_sd: population_sd(&argmax_minutes).unwrap_or(0.0),
        daily_total_sd: population_sd(&totals).unwrap_or(0.0),
    }
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// `None` when the inputs differ in length, have fewer than 3 values, or
/// either ranking is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Which representation to cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Motif,
    Profile,
    Nonmotif,
}

impl std::str::FromStr for FeatureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "motif" => Ok(FeatureKind::Motif),
            "profile" => Ok(FeatureKind::Profile),
            "nonmotif" => Ok(FeatureKind::Nonmotif),
            other => Err(format!("unknown feature kind `{other}`")),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureKind::Motif => "motif",
            FeatureKind::Profile => "profile",
            FeatureKind::Nonmotif => "nonmotif",
        })
    }
}

/// Catalogue for one household: symbolise, group, exclude trivial families.
pub fn household_catalog(id: &str, windows: &[PeakDayWindow], params: &SaxParams) -> Result<MotifCatalog, FeatureError> {
    let occ = sax::household_occurrences(windows, params)?;
    let days = windows.iter().filter(|w| w.valid).count();
    Ok(exclude_trivial(&build_catalog(id, &occ, days)))
}

/// Catalogues for every household, in id order.
pub fn catalogs(
    windows: &BTreeMap<String, Vec<PeakDayWindow>>,
    params: &SaxParams,
) -> Result<Vec<MotifCatalog>, FeatureError> {
    params.validate()?;
    let list: Vec<(&String, &Vec<PeakDayWindow>)> = windows.iter().collect();
    list.par_iter()
        .map(|(id, ws)| household_catalog(id, ws, params))
        .collect()
}

/// Raw (unnormalised) feature matrix of the requested kind.
pub fn feature_matrix(
    kind: FeatureKind,
    windows: &BTreeMap<String, Vec<PeakDayWindow>>,
    params: &SaxParams,
) -> Result<FeatureMatrix, FeatureError> {
    if let Some((id, _)) = windows.iter().find(|(_, ws)| !ws.iter().any(|w| w.valid)) {
        return Err(FeatureError::NoValidDays(id.clone()));
    }
    let ids: Vec<String> = windows.keys().cloned().collect();
    let (columns, rows): (Vec<String>, Vec<Vec<f64>>) = match kind {
        FeatureKind::Motif => {
            let rows = catalogs(windows, params)?
                .iter()
                .map(|c| motif_features(c).to_vec())
                .collect();
            (MotifFeatures::COLUMNS.iter().map(|s| s.to_string()).collect(), rows)
        }
        FeatureKind::Profile => {
            let rows: Vec<Vec<f64>> = windows.values().map(|ws| profile_features(ws).values).collect();
            let width = rows.first().map_or(0, Vec::len);
            ((0..width).map(|i| format!("p{i:02}")).collect(), rows)
        }
        FeatureKind::Nonmotif => {
            let rows = windows
                .values()
                .map(|ws| {
                    let f = nonmotif_features(ws);
                    vec![f.time_of_max_sd, f.daily_total_sd]
                })
                .collect();
            (NonMotifFeatures::COLUMNS.iter().map(|s| s.to_string()).collect(), rows)
        }
    };
    Ok(FeatureMatrix::new(ids, columns, rows)?)
}

/// Flat listing `household_id,word,date,start_clock` of every catalogue entry.
pub fn write_catalog_csv<W: Write>(mut out: W, catalogs: &[MotifCatalog]) -> io::Result<()> {
    writeln!(out, "household_id,word,date,start_clock")?;
    for c in catalogs {
        for (word, occ) in &c.entries {
            for o in occ {
                writeln!(out, "{},{},{},{}", c.household_id, word, o.date, o.start_clock)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;
    use proptest::prelude::*;

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2011, 3, 7).unwrap() + Duration::days(i)
    }

    fn w(s: &str) -> MotifWord {
        MotifWord::new(s, 5).unwrap()
    }

    fn occ(word: &str, d: i64, clock: u32) -> WindowOccurrence {
        WindowOccurrence {
            household_id: "h".into(),
            date: day(d),
            start_slot: clock as usize / 5,
            start_clock: clock,
            word: w(word),
            range_watts: 200.0,
        }
    }

    fn catalog(entries: &[(&str, &[(i64, u32)])], days: usize) -> MotifCatalog {
        let occs: Vec<WindowOccurrence> = entries
            .iter()
            .flat_map(|(word, list)| list.iter().map(move |&(d, c)| occ(word, d, c)))
            .collect();
        build_catalog("h", &occs, days)
    }

    fn win(readings: Vec<f64>, d: i64) -> PeakDayWindow {
        PeakDayWindow { household_id: "h".into(), date: day(d), readings, valid: true }
    }

    #[test]
    fn grouping() {
        let empty = build_catalog("h", &[], 5);
        assert!(empty.entries.is_empty());
        assert_eq!(empty.days_sampled, 5);

        let c = catalog(&[("bbbbbe", &[(2, 60), (0, 60), (1, 60)])], 3);
        let list = &c.entries[&w("bbbbbe")];
        assert_eq!(list.len(), 3);
        assert!(list.windows(2).all(|p| p[0] <= p[1]));

        let c = catalog(&[("abcdea", &[(0, 10), (0, 40)])], 1);
        assert_eq!(c.entries[&w("abcdea")].len(), 2);
    }

    #[test]
    fn spike_positions() {
        assert_eq!(spike_position(&w("ccccca")), Some(5));
        assert_eq!(spike_position(&w("accccc")), Some(0));
        assert_eq!(spike_position(&w("cacccc")), Some(1));
        assert_eq!(spike_position(&w("abcdea")), None);
        assert_eq!(spike_position(&w("cccccc")), None);
        assert_eq!(spike_position(&w("aacccc")), None);
    }

    #[test]
    fn trivial_family_keeps_canonical_member() {
        let fam: Vec<(&str, &[(i64, u32)])> = ["ccccca", "ccccac", "cccacc", "ccaccc", "cacccc", "accccc"]
            .iter()
            .map(|s| (*s, &[(0i64, 0u32)][..]))
            .collect();
        let mut entries = fam.clone();
        entries.push(("abcdea", &[(0, 5)]));
        let out = exclude_trivial(&catalog(&entries, 1));
        let words: Vec<&str> = out.entries.keys().map(|k| k.as_str()).collect();
        assert_eq!(words, vec!["abcdea", "ccccca"]);
        assert!(exclude_trivial(&MotifCatalog::default()).entries.is_empty());
    }

    #[test]
    fn timing_sd_cases() {
        assert_eq!(timing_sd(&[1020.0, 1020.0, 1020.0]), Some(0.0));
        assert_eq!(timing_sd(&[960.0, 1200.0]), Some(120.0));
        assert_eq!(timing_sd(&[42.0]), Some(0.0));
        assert_eq!(timing_sd(&[]), None);
    }

    #[test]
    fn single_motif_zero_fills() {
        // five occurrences at 0,0,0,30,30: mean 12, sd = sqrt((3*144+2*324)/5) = 14.697
        let c = catalog(&[("bbbbbe", &[(0, 0), (1, 0), (2, 0), (3, 30), (4, 30)])], 5);
        let f = motif_features(&c);
        assert_eq!(f.f1, 5.0);
        assert!((f.f2 - (1080.0f64 / 5.0).sqrt()).abs() < 1e-12);
        assert_eq!((f.f3, f.f4, f.f5, f.f6), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(f.f7, 1.0);
        assert_eq!(f.f8, 1.0);
        assert_eq!(motif_features(&MotifCatalog::default()), MotifFeatures::default());
    }

    #[test]
    fn regular_threshold_uses_integer_ceiling() {
        assert_eq!(regular_day_threshold(10), 3);
        assert_eq!(regular_day_threshold(4), 2);
        assert_eq!(regular_day_threshold(11), 4);
        let c = catalog(&[("bbbbbe", &[(0, 0), (1, 0), (2, 0)])], 10);
        assert_eq!(motif_features(&c).f8, 1.0);
        let c = catalog(&[("bbbbbe", &[(0, 0), (0, 5), (1, 0)])], 10);
        assert_eq!(motif_features(&c).f8, 0.0);
    }

    #[test]
    fn ranking_breaks_ties_by_word() {
        let c = catalog(
            &[
                ("dddadd", &[(0, 0), (1, 0)]),
                ("bbbbbe", &[(0, 0), (1, 0)]),
                ("abcdea", &[(0, 0), (1, 0), (2, 5)]),
                ("eeeeeb", &[(0, 0)]),
            ],
            3,
        );
        let order: Vec<&str> = ranked_motifs(&c).iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(order, vec!["abcdea", "bbbbbe", "dddadd", "eeeeeb"]);
        let f = motif_features(&c);
        assert_eq!((f.f1, f.f3, f.f5), (3.0, 2.0, 2.0));
        assert_eq!(f.f7, 3.0);
    }

    #[test]
    fn profile_cases() {
        let a = win((0..49).map(|i| i as f64).collect(), 0);
        let p = profile_features(&[a.clone(), a.clone()]);
        assert_eq!(p.values.len(), 48);
        assert_eq!(p.values[..], a.readings[..48]);
        let p = profile_features(&[win(vec![100.0; 49], 0), win(vec![300.0; 49], 1)]);
        assert!(p.values.iter().all(|&v| v == 200.0));
    }

    #[test]
    fn nonmotif_cases() {
        let mut r = vec![100.0; 49];
        r[24] = 900.0; // 18:00
        let f = nonmotif_features(&[win(r.clone(), 0), win(r.clone(), 1), win(r, 2)]);
        assert_eq!(f.time_of_max_sd, 0.0);

        // totals 1000, 1000, 4000 over the 48 cells
        let total = |t: f64| {
            let mut r = vec![t / 48.0; 49];
            r[48] = 0.0;
            r
        };
        let f = nonmotif_features(&[win(total(1000.0), 0), win(total(1000.0), 1), win(total(4000.0), 2)]);
        assert!((f.daily_total_sd - 1000.0 * 2f64.sqrt()).abs() < 1e-6);
        // flat day: the first slot wins the tie
        assert_eq!(f.time_of_max_sd, 0.0);
    }

    /// Pearson on ranks computed by counting, independent of the sort-based ranker.
    fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
        let rank = |v: &[f64], i: usize| {
            let less = v.iter().filter(|&&u| u < v[i]).count() as f64;
            let eq = v.iter().filter(|&&u| u == v[i]).count() as f64;
            less + (eq + 1.0) / 2.0
        };
        let rx: Vec<f64> = (0..x.len()).map(|i| rank(x, i)).collect();
        let ry: Vec<f64> = (0..y.len()).map(|i| rank(y, i)).collect();
        let n = x.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn spearman_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman_rho(&x, &x), Some(1.0));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman_rho(&x, &neg), Some(-1.0));
        let rho = spearman_rho(&x, &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!((rho - 0.6).abs() < 1e-12);
        assert!((brute_spearman(&x, &[2.0, 1.0, 4.0, 3.0]) - 0.6).abs() < 1e-12);
        assert_eq!(spearman_rho(&x, &[1.0, 1.0, 1.0, 1.0]), None);
        assert_eq!(spearman_rho(&[1.0, 2.0], &[1.0, 2.0]), None);
    }

    proptest! {
        #[test]
        fn spearman_matches_counting_oracle(
            pairs in proptest::collection::vec((0u8..6, 0u8..6), 3..30)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            if let Some(rho) = spearman_rho(&x, &y) {
                prop_assert!((rho - brute_spearman(&x, &y)).abs() < 1e-9);
            }
        }

        #[test]
        fn feature_invariants(
            raw in proptest::collection::vec((0usize..8, 0i64..12, 0u32..42), 0..120),
            days in 4usize..12,
        ) {
            let words = ["bbbbbe", "dddadd", "abcdea", "bbbbeb", "ccccca", "eaeaea", "cdcdcd", "aabbcc"];
            let occs: Vec<WindowOccurrence> = raw
                .iter()
                .map(|&(wi, d, s)| occ(words[wi], d % days as i64, s * 5))
                .collect();
            let cat = exclude_trivial(&build_catalog("h", &occs, days));
            let f = motif_features(&cat);
            prop_assert!(f.f1 >= f.f3 && f.f3 >= f.f5 && f.f5 >= 0.0);
            for sd in [f.f2, f.f4, f.f6] {
                prop_assert!((0.0..=240.0).contains(&sd));
            }
            prop_assert!(f.f8 <= f.f7);

            // day order does not matter
            let mut rev = occs.clone();
            rev.reverse();
            for o in rev.iter_mut() {
                o.date = day(days as i64 - 1 - (o.date - day(0)).num_days());
            }
            let f_rev = motif_features(&exclude_trivial(&build_catalog("h", &rev, days)));
            prop_assert_eq!(f.to_vec(), f_rev.to_vec());
        }
    }
}
