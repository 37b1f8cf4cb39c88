//! Symbolisation of peak-period consumption changes.
//!
//! Each valid peak window is differenced, then a window of `motif_len`
//! deltas slides across the day one step at a time. A window whose raw range
//! is below the noise floor is dropped; every other window is z-normalised
//! and each value mapped to a letter by standard-normal breakpoints. Window
//! length equals word length, so there is no PAA step.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ingest::PeakDayWindow;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SaxError {
    #[error("alphabet size must be between 2 and 10, got {0}")]
    AlphabetSize(usize),
    #[error("motif length must be at least 2, got {0}")]
    MotifLen(usize),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid word `{0}`")]
    BadWord(String),
}

/// Symbolisation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaxParams {
    pub alphabet_size: usize,
    pub motif_len: usize,
    /// Minimum raw delta range (watts) for a window to be symbolised.
    pub noise_floor_watts: f64,
    /// Also emit the window ending on the last delta.
    pub include_final_window: bool,
}

impl Default for SaxParams {
    fn default() -> Self {
        SaxParams {
            alphabet_size: 5,
            motif_len: 6,
            noise_floor_watts: 100.0,
            include_final_window: false,
        }
    }
}

impl SaxParams {
    pub fn validate(&self) -> Result<(), SaxError> {
        if !(2..=10).contains(&self.alphabet_size) {
            return Err(SaxError::AlphabetSize(self.alphabet_size));
        }
        if self.motif_len < 2 {
            return Err(SaxError::MotifLen(self.motif_len));
        }
        Ok(())
    }
}

/// A symbol string such as `bbbbbe`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MotifWord(String);

impl MotifWord {
    /// Build a word, checking every letter is among the first `alphabet_size`.
    pub fn new(symbols: &str, alphabet_size: usize) -> Result<Self, SaxError> {
        let last = (b'a' + alphabet_size as u8 - 1) as char;
        if symbols.is_empty() || !symbols.chars().all(|c| ('a'..=last).contains(&c)) {
            return Err(SaxError::BadWord(symbols.to_string()));
        }
        Ok(MotifWord(symbols.to_string()))
    }

    fn from_indices(indices: &[usize]) -> Self {
        MotifWord(indices.iter().map(|&i| (b'a' + i as u8) as char).collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for MotifWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// First differences of one peak window.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSeries {
    pub household_id: String,
    pub date: NaiveDate,
    pub deltas: Vec<f64>,
}

/// One symbolised window position on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOccurrence {
    pub household_id: String,
    pub date: NaiveDate,
    pub start_slot: usize,
    /// Minutes after peak start; always `start_slot * 5`.
    pub start_clock: u32,
    pub word: MotifWord,
    pub range_watts: f64,
}

/// `None` for invalid windows.
pub fn difference(window: &PeakDayWindow) -> Option<DeltaSeries> {
    if !window.valid {
        return None;
    }
    Some(DeltaSeries {
        household_id: window.household_id.clone(),
        date: window.date,
        deltas: window.readings.windows(2).map(|w| w[1] - w[0]).collect(),
    })
}

/// Standard-normal quantiles at `i / alphabet_size`, ascending.
pub fn breakpoints(alphabet_size: usize) -> Result<Vec<f64>, SaxError> {
    if !(2..=10).contains(&alphabet_size) {
        return Err(SaxError::AlphabetSize(alphabet_size));
    }
    let normal = Normal::standard();
    let a = alphabet_size as f64;
    let mut cuts: Vec<f64> = (1..alphabet_size).map(|i| normal.inverse_cdf(i as f64 / a)).collect();
    // exact symmetry: mirror the lower half onto the upper half
    let m = cuts.len();
    for i in 0..m / 2 {
        cuts[m - 1 - i] = -cuts[i];
    }
    if m % 2 == 1 {
        cuts[m / 2] = 0.0;
    }
    Ok(cuts)
}

/// Outcome of symbolising one window.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbolized {
    Word(MotifWord),
    /// Range below the noise floor, or no spread at all.
    Filtered,
}

/// Letter index of `z`: the number of cut points strictly below it.
fn letter(z: f64, cuts: &[f64]) -> usize {
    cuts.partition_point(|&c| c < z)
}

/// Symbolise one window of raw deltas.
pub fn symbolize_window(deltas: &[f64], cuts: &[f64], noise_floor: f64) -> Symbolized {
    let (lo, hi) = deltas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if deltas.is_empty() || hi - lo < noise_floor {
        return Symbolized::Filtered;
    }
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let sd = (deltas.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return Symbolized::Filtered;
    }
    let idx: Vec<usize> = deltas.iter().map(|v| letter((v - mean) / sd, cuts)).collect();
    Symbolized::Word(MotifWord::from_indices(&idx))
}

/// Number of window positions emitted for `n_deltas` deltas.
pub fn window_count(n_deltas: usize, params: &SaxParams) -> usize {
    let all = (n_deltas + 1).saturating_sub(params.motif_len);
    if params.include_final_window {
        all
    } else {
        all.saturating_sub(1)
    }
}

/// Slide the symboliser over one day. Filtered windows are omitted.
pub fn window_words(series: &DeltaSeries, params: &SaxParams) -> Result<Vec<WindowOccurrence>, SaxError> {
    params.validate()?;
    let cuts = breakpoints(params.alphabet_size)?;
    let count = window_count(series.deltas.len(), params);
    let mut out = Vec::new();
    for start in 0..count {
        let window = &series.deltas[start..start + params.motif_len];
        if let Symbolized::Word(word) = symbolize_window(window, &cuts, params.noise_floor_watts) {
            let (lo, hi) = window
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            out.push(WindowOccurrence {
                household_id: series.household_id.clone(),
                date: series.date,
                start_slot: start,
                start_clock: (start * 5) as u32,
                word,
                range_watts: hi - lo,
            });
        }
    }
    Ok(out)
}

/// All occurrences from a household's valid windows.
pub fn household_occurrences(windows: &[PeakDayWindow], params: &SaxParams) -> Result<Vec<WindowOccurrence>, SaxError> {
    let mut out = Vec::new();
    for delta in windows.iter().filter_map(difference) {
        out.extend(window_words(&delta, params)?);
    }
    Ok(out)
}
