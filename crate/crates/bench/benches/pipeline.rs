use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use motifvar_bench::synthetic_windows;
use motifvar_core::cluster::{minmax_normalize, run_suite, SuiteOptions};
use motifvar_core::motif::{feature_matrix, FeatureKind};
use motifvar_core::sax::{breakpoints, household_occurrences, symbolize_window, SaxParams};
use motifvar_core::synth::{generate, Scenario};
use motifvar_core::validity::corrected_rand;

fn sax(c: &mut Criterion) {
    let cuts = breakpoints(5).unwrap();
    let window = [0.0, 0.0, 0.0, 0.0, 0.0, 800.0];
    c.bench_function("symbolize_window", |b| b.iter(|| symbolize_window(black_box(&window), &cuts, 100.0)));
    let ws = synthetic_windows(1, 60);
    let days = ws.values().next().unwrap();
    let params = SaxParams::default();
    c.bench_function("household_occurrences_60_days", |b| {
        b.iter(|| household_occurrences(black_box(days), &params).unwrap())
    });
}

fn features(c: &mut Criterion) {
    let ws = synthetic_windows(30, 60);
    let params = SaxParams::default();
    let mut g = c.benchmark_group("feature_matrix_90_households");
    for kind in [FeatureKind::Motif, FeatureKind::Profile, FeatureKind::Nonmotif] {
        g.bench_function(kind.to_string(), |b| b.iter(|| feature_matrix(kind, black_box(&ws), &params).unwrap()));
    }
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let ws = synthetic_windows(30, 60);
    let m = minmax_normalize(&feature_matrix(FeatureKind::Motif, &ws, &SaxParams::default()).unwrap());
    let opts = SuiteOptions::default();
    let mut g = c.benchmark_group("suite");
    g.sample_size(10);
    g.bench_function("all_algorithms_k8_90_households", |b| b.iter(|| run_suite(black_box(&m), &opts)));
    g.finish();
}

fn validity(c: &mut Criterion) {
    let p: Vec<usize> = (0..204).map(|i| i % 8 + 1).collect();
    let q: Vec<usize> = (0..204).map(|i| (i * 7) % 8 + 1).collect();
    c.bench_function("corrected_rand_204", |b| b.iter(|| corrected_rand(black_box(&p), black_box(&q)).unwrap()));
}

fn synth(c: &mut Criterion) {
    let sc = Scenario::from_toml(
        "seed = 1\ndays = 60\n[[archetype]]\nname = \"a\"\nhouseholds = 30\ntiming_jitter_sd = 30.0\n",
    )
    .unwrap();
    let mut g = c.benchmark_group("synth");
    g.sample_size(10);
    g.bench_function("generate_30_households_60_days", |b| b.iter(|| generate(black_box(&sc)).unwrap()));
    g.finish();
}

criterion_group!(benches, sax, features, clustering, validity, synth);
criterion_main!(benches);
