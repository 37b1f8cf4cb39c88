//! Independent reference implementations used by integration and acceptance tests.
#![allow(dead_code)]

use chrono::{TimeZone, Utc};
use motifvar_core::ingest::{align_to_grid, AlignOptions, RawReading, SLOT_SECONDS};
use rand::Rng;

/// Integral (watt-seconds) of the piecewise-constant raw signal over `[a, b)`,
/// each reading holding until the next one.
pub fn raw_integral(times: &[i64], power: &[f64], a: i64, b: i64) -> f64 {
    let mut total = 0.0;
    for i in 0..times.len() {
        let start = times[i];
        let end = times.get(i + 1).copied().unwrap_or(i64::MAX);
        let lo = start.max(a);
        let hi = end.min(b);
        if hi > lo {
            total += power[i] * (hi - lo) as f64;
        }
    }
    total
}

/// Irregular stream: intervals between 1 s and 20 min, occasionally longer.
pub fn random_stream(rng: &mut impl Rng, len: usize) -> (Vec<i64>, Vec<f64>) {
    let mut t = 1_300_000_000 + rng.random_range(0..600);
    let mut times = Vec::with_capacity(len);
    let mut power = Vec::with_capacity(len);
    for _ in 0..len {
        times.push(t);
        power.push(rng.random_range(0.0..5000.0));
        t += if rng.random_bool(0.05) { rng.random_range(901..4000) } else { rng.random_range(1..400) };
    }
    (times, power)
}

pub fn to_readings(id: &str, times: &[i64], power: &[f64]) -> Vec<RawReading> {
    times
        .iter()
        .zip(power)
        .map(|(&t, &p)| RawReading {
            household_id: id.to_string(),
            timestamp: Utc.timestamp_opt(t, 0).unwrap(),
            power: p,
        })
        .collect()
}

/// Maximal runs of consecutive non-gap slots.
fn gap_free_runs(n: usize, gaps: &std::collections::BTreeSet<usize>) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for s in 0..=n {
        let ok = s < n && !gaps.contains(&s);
        match (ok, start) {
            (true, None) => start = Some(s),
            (false, Some(a)) => {
                runs.push((a, s));
                start = None;
            }
            _ => {}
        }
    }
    runs
}

/// Aligns a stream and compares grid and raw integrals over every gap-free
/// run of cells lying inside the record. Returns the number of runs checked
/// and the worst relative error.
pub fn conservation_check(times: &[i64], power: &[f64]) -> (usize, f64) {
    let series = align_to_grid(&to_readings("h", times, power), &AlignOptions::default()).unwrap();
    let g0 = series.grid_start.timestamp();
    let last = *times.last().unwrap();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (a, b) in gap_free_runs(series.values.len(), &series.gaps) {
        // cells must lie inside the raw record to have a defined raw integral
        let lo = (g0 + a as i64 * SLOT_SECONDS).max(times[0]);
        let hi = (g0 + b as i64 * SLOT_SECONDS).min(last);
        if hi <= lo {
            continue;
        }
        let first_cell = ((lo - g0) as f64 / SLOT_SECONDS as f64).ceil() as usize;
        let end_cell = ((hi - g0) / SLOT_SECONDS) as usize;
        if end_cell <= first_cell {
            continue;
        }
        let grid: f64 = series.values[first_cell..end_cell].iter().sum::<f64>() * SLOT_SECONDS as f64;
        let raw = raw_integral(
            times,
            power,
            g0 + first_cell as i64 * SLOT_SECONDS,
            g0 + end_cell as i64 * SLOT_SECONDS,
        );
        let rel = (grid - raw).abs() / raw.abs().max(1e-300);
        worst = worst.max(rel);
        checked += 1;
    }
    (checked, worst)
}

fn normal_cdf(x: f64) -> f64 {
    // composite Simpson on the density from 0 to |x|
    let n = 20_000;
    let h = x.abs() / n as f64;
    let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(x.abs());
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half = s * h / 3.0;
    if x >= 0.0 { 0.5 + half } else { 0.5 - half }
}

/// Standard-normal quantiles at i/a by bisection.
pub fn brute_breakpoints(a: usize) -> Vec<f64> {
    (1..a)
        .map(|i| {
            let target = i as f64 / a as f64;
            let (mut lo, mut hi) = (-10.0, 10.0);
            for _ in 0..200 {
                let mid = (lo + hi) / 2.0;
                if normal_cdf(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo + hi) / 2.0
        })
        .collect()
}

/// Straightforward discretiser: `None` when the raw range is under the floor
/// or the window is flat.
pub fn brute_symbolize(deltas: &[f64], cuts: &[f64], floor: f64) -> Option<String> {
    let max = deltas.iter().cloned().fold(f64::MIN, f64::max);
    let min = deltas.iter().cloned().fold(f64::MAX, f64::min);
    if max - min < floor {
        return None;
    }
    let n = deltas.len() as f64;
    let mean: f64 = deltas.iter().sum::<f64>() / n;
    let var: f64 = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    if var == 0.0 {
        return None;
    }
    let mut word = String::new();
    for d in deltas {
        let z = (d - mean) / var.sqrt();
        let mut letter = 0u8;
        for c in cuts {
            if *c < z {
                letter += 1;
            }
        }
        word.push((b'a' + letter) as char);
    }
    Some(word)
}

/// Corrected Rand by counting agreeing pairs directly.
pub fn brute_ari(p: &[usize], q: &[usize]) -> f64 {
    let n = p.len();
    let (mut both, mut only_p, mut only_q, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sp = p[i] == p[j];
            let sq = q[i] == q[j];
            total += 1.0;
            if sp && sq {
                both += 1.0;
            }
            if sp {
                only_p += 1.0;
            }
            if sq {
                only_q += 1.0;
            }
        }
    }
    let expected = only_p * only_q / total;
    let max = (only_p + only_q) / 2.0;
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}
