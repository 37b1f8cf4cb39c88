//! Shared fixtures for the benchmarks in `benches/`.

use std::collections::BTreeMap;

use motifvar_core::ingest::PeakDayWindow;
use motifvar_core::pipeline::{windows, IngestParams};
use motifvar_core::synth::{generate, Scenario};

/// Peak windows of a synthetic population with three timing archetypes.
pub fn synthetic_windows(households_per_archetype: usize, days: usize) -> BTreeMap<String, Vec<PeakDayWindow>> {
    let mut toml = format!("seed = 1\ndays = {days}\n");
    for (name, jitter) in [("steady", 5.0), ("moderate", 30.0), ("erratic", 90.0)] {
        toml.push_str(&format!(
            "[[archetype]]\nname = \"{name}\"\nhouseholds = {households_per_archetype}\ntiming_jitter_sd = {jitter:?}\n"
        ));
    }
    let g = generate(&Scenario::from_toml(&toml).expect("fixture scenario")).expect("fixture generation");
    windows(g.readings, &IngestParams::default()).expect("fixture ingest").windows
}
