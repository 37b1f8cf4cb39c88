//! One function per pipeline stage. Each stage reads what earlier stages
//! wrote (or takes it in memory from `run`) and returns the files it wrote.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::NaiveTime;
use motifvar_core::cluster::{minmax_normalize, run_suite, FeatureMatrix};
use motifvar_core::ingest::{read_readings_file, write_readings_csv, write_windows_csv, PeakDayWindow};
use motifvar_core::motif::{catalogs, write_catalog_csv, FeatureKind};
use motifvar_core::pipeline::{self, ClusterParams, IngestParams};
use motifvar_core::sax::SaxParams;
use motifvar_core::synth::{generate, Scenario};
use motifvar_core::validity::{consistency_report, partition_quality, ValidityReport};

use crate::args::{ClusterCmd, Command, FeaturesCmd, IngestCmd, ReportCmd, RunCmd, SynthCmd};
use crate::artifacts::{self as art, ensure_dir, write_json, write_with, Manifest, PartitionSet, RunConfig};
use crate::error::{Category, CliError, Result};
use crate::plot;

pub type Windows = BTreeMap<String, Vec<PeakDayWindow>>;

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(c) => ingest_cmd(c),
        Command::Features(c) => features_cmd(c),
        Command::Cluster(c) => cluster_cmd(c),
        Command::Report(c) => report_cmd(c),
        Command::Synth(c) => synth_cmd(c).map(|_| ()),
        Command::Run(c) => run_cmd(*c).map(|_| ()),
    }
}

pub fn ingest_stage(input: &Path, params: &IngestParams, out: &Path) -> Result<(Windows, Vec<String>)> {
    let report = read_readings_file(input, &params.parse_options()?)?;
    if !report.rejects.is_empty() {
        log::warn!("{} of {} rows rejected", report.rejects.len(), report.rows);
        for r in report.rejects.iter().take(5) {
            log::warn!("line {}: {}", r.line, r.reason);
        }
    }
    let outcome = pipeline::windows(report.readings, params)?;
    for (id, why) in &outcome.dropped {
        log::info!("dropped {id}: {why}");
    }
    if outcome.windows.is_empty() {
        return Err(CliError::new(
            Category::Ingest,
            format!("no household has {} valid days in the selected period", params.min_days),
        ));
    }
    write_with(&out.join(art::WINDOWS), |w| write_windows_csv(w, &outcome.windows))?;
    write_with(&out.join(art::DROPPED), |w| art::write_dropped_csv(w, &outcome.dropped))?;
    Ok((outcome.windows, vec![art::WINDOWS.into(), art::DROPPED.into()]))
}

pub fn features_stage(windows: &Windows, kind: FeatureKind, sax: &SaxParams, out: &Path) -> Result<(FeatureMatrix, Vec<String>)> {
    let matrix = pipeline::features(windows, kind, sax)?;
    write_with(&out.join(art::FEATURES), |w| matrix.write_csv(w))?;
    let mut files = vec![art::FEATURES.to_string()];
    if kind == FeatureKind::Motif {
        let cats = catalogs(windows, sax)?;
        write_with(&out.join(art::MOTIFS), |w| write_catalog_csv(w, &cats))?;
        files.push(art::MOTIFS.into());
    }
    Ok((matrix, files))
}

pub fn cluster_stage(
    raw: &FeatureMatrix,
    kind: FeatureKind,
    params: &ClusterParams,
    out: &Path,
) -> Result<(FeatureMatrix, PartitionSet, Vec<String>)> {
    let normalized = minmax_normalize(raw);
    let suite = run_suite(&normalized, &params.suite_options());
    if suite.partitions.is_empty() {
        let why: Vec<String> = suite.failures.iter().map(|(a, e)| format!("{a}: {e}")).collect();
        return Err(CliError::new(Category::Cluster, format!("every algorithm failed: {}", why.join("; "))));
    }
    let set = PartitionSet {
        features: kind,
        household_ids: normalized.household_ids.clone(),
        partitions: suite.partitions.into_values().collect(),
        failures: suite.failures,
    };
    write_with(&out.join(art::NORMALIZED), |w| normalized.write_csv(w))?;
    write_with(&out.join(art::PARTITIONS_CSV), |w| art::write_partitions_csv(w, &set))?;
    write_json(&out.join(art::PARTITIONS_JSON), &set)?;
    Ok((
        normalized,
        set,
        vec![art::NORMALIZED.into(), art::PARTITIONS_CSV.into(), art::PARTITIONS_JSON.into()],
    ))
}

/// Validity report over the normalised matrix. With a single partition only
/// the quality table is written.
pub fn report_stage(
    matrix: &FeatureMatrix,
    set: &PartitionSet,
    mia_raw: bool,
    out: &Path,
) -> Result<(Option<ValidityReport>, Vec<String>)> {
    if matrix.household_ids != set.household_ids {
        return Err(CliError::new(
            Category::InvalidInput,
            "partition household ids do not match the feature matrix rows",
        ));
    }
    let normalized = minmax_normalize(matrix);
    if set.partitions.len() < 2 {
        log::warn!("one partition only: no consistency matrix");
        let q = set
            .partitions
            .iter()
            .map(|p| partition_quality(p, &normalized, mia_raw))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        write_with(&out.join(art::QUALITY_CSV), |w| {
            use std::io::Write;
            writeln!(w, "features,algorithm,sizes,mia,cdi")?;
            for q in &q {
                let sizes: Vec<String> = q.sizes.iter().map(ToString::to_string).collect();
                let cdi = q.cdi.map_or_else(|| "NA".to_string(), |c| format!("{c:.6}"));
                writeln!(w, "{},{},{},{:.6},{}", set.features, q.algorithm, sizes.join(";"), q.mia, cdi)?;
            }
            Ok(())
        })?;
        return Ok((None, vec![art::QUALITY_CSV.into()]));
    }
    let report = consistency_report(&set.features.to_string(), &set.partitions, &normalized, mia_raw)?;
    write_json(&out.join(art::VALIDITY_JSON), &report)?;
    write_with(&out.join(art::QUALITY_CSV), |w| report.write_quality_csv(w, true))?;
    write_with(&out.join(art::RAND_CSV), |w| report.write_rand_csv(w))?;
    Ok((
        Some(report),
        vec![art::VALIDITY_JSON.into(), art::QUALITY_CSV.into(), art::RAND_CSV.into()],
    ))
}

fn peak_minutes(params: &IngestParams) -> f64 {
    let parse = |s: &str| NaiveTime::parse_from_str(s, "%H:%M").ok();
    match (parse(&params.peak_start), parse(&params.peak_end)) {
        (Some(a), Some(b)) if b > a => (b - a).num_minutes() as f64,
        _ => 240.0,
    }
}

pub fn plot_stage(
    set: &PartitionSet,
    algorithm: motifvar_core::cluster::Algorithm,
    windows: Option<&Windows>,
    sax: &SaxParams,
    ingest: &IngestParams,
    out: &Path,
) -> Vec<String> {
    let Some(partition) = set.get(algorithm).or_else(|| set.partitions.first()) else {
        return Vec::new();
    };
    plot::write_plots(
        &out.join(art::PLOT_DIR),
        partition,
        &set.household_ids,
        windows,
        sax,
        peak_minutes(ingest),
    )
    .into_iter()
    .map(|f| format!("{}/{f}", art::PLOT_DIR))
    .collect()
}

pub fn synth_stage(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(scenario).map_err(|e| CliError::read(scenario, e))?;
    let mut sc = Scenario::from_toml(&text)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let g = generate(&sc)?;
    write_with(&out.join(art::READINGS), |w| write_readings_csv(w, &g.readings))?;
    write_with(&out.join(art::TRUTH), |w| g.truth.write_csv(w))?;
    Ok(vec![art::READINGS.into(), art::TRUTH.into()])
}

fn ingest_cmd(c: IngestCmd) -> Result<()> {
    let mut params = IngestParams::default();
    c.ingest.apply(&mut params);
    ensure_dir(&c.out_dir)?;
    let (windows, _) = ingest_stage(&c.input, &params, &c.out_dir)?;
    println!("{} households written to {}", windows.len(), c.out_dir.join(art::WINDOWS).display());
    Ok(())
}

fn features_cmd(c: FeaturesCmd) -> Result<()> {
    let mut sax = SaxParams::default();
    c.sax.apply(&mut sax)?;
    let windows = art::read_windows(&c.windows)?;
    ensure_dir(&c.out_dir)?;
    let (m, _) = features_stage(&windows, c.features, &sax, &c.out_dir)?;
    println!("{} x {} {} matrix written", m.len(), m.width(), c.features);
    Ok(())
}

fn cluster_cmd(c: ClusterCmd) -> Result<()> {
    let mut params = ClusterParams::default();
    c.cluster.apply(&mut params)?;
    let raw = art::read_matrix(&c.matrix)?;
    let kind = art::infer_kind(&raw).ok_or_else(|| CliError::new(Category::InvalidInput, "unrecognised feature columns"))?;
    ensure_dir(&c.out_dir)?;
    let (_, set, _) = cluster_stage(&raw, kind, &params, &c.out_dir)?;
    for (a, e) in &set.failures {
        eprintln!("warning: {a} failed: {e}");
    }
    println!("{} partitions written", set.partitions.len());
    Ok(())
}

fn report_cmd(c: ReportCmd) -> Result<()> {
    let mut sax = SaxParams::default();
    c.sax.apply(&mut sax)?;
    let matrix = art::read_matrix(&c.matrix)?;
    let set: PartitionSet = art::read_json(&c.partitions)?;
    let windows = c.windows.as_deref().map(art::read_windows).transpose()?;
    ensure_dir(&c.out_dir)?;
    let (report, _) = report_stage(&matrix, &set, c.mia_raw, &c.out_dir)?;
    plot_stage(&set, c.plot_algorithm, windows.as_ref(), &sax, &IngestParams::default(), &c.out_dir);
    if let Some(r) = report {
        println!("mean off-diagonal corrected Rand {:.4}", r.mean_offdiagonal_rand);
    }
    Ok(())
}

fn synth_cmd(c: SynthCmd) -> Result<Vec<String>> {
    ensure_dir(&c.out_dir)?;
    let files = synth_stage(&c.scenario, c.seed, &c.out_dir)?;
    println!("synthetic readings written to {}", c.out_dir.join(art::READINGS).display());
    Ok(files)
}

/// Final configuration of `run`: manifest (if any), then explicit flags.
pub fn run_config(c: &RunCmd) -> Result<RunConfig> {
    let mut cfg = match &c.manifest {
        Some(path) => Manifest::load(path)?.config,
        None => RunConfig::default(),
    };
    if c.input.is_some() || c.scenario.is_some() {
        cfg.input = c.input.clone();
        cfg.scenario = c.scenario.clone();
    }
    if let Some(f) = c.features {
        cfg.features = f;
    }
    if let Some(a) = c.plot_algorithm {
        cfg.plot_algorithm = a;
    }
    if c.no_plots {
        cfg.plots = false;
    }
    c.ingest.apply(&mut cfg.ingest);
    c.sax.apply(&mut cfg.sax)?;
    c.cluster.apply(&mut cfg.cluster)?;
    match (&cfg.input, &cfg.scenario) {
        (Some(_), None) | (None, Some(_)) => Ok(cfg),
        (None, None) => Err(CliError::config("run needs --input or --scenario")),
        (Some(_), Some(_)) => Err(CliError::config("--input and --scenario are exclusive")),
    }
}

/// Every stage in order; returns the manifest written.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    ensure_dir(out)?;
    let mut files = Vec::new();
    let input = match (&cfg.input, &cfg.scenario) {
        (Some(p), _) => p.clone(),
        (None, Some(s)) => {
            files.extend(synth_stage(s, None, out)?);
            out.join(art::READINGS)
        }
        (None, None) => return Err(CliError::config("run needs --input or --scenario")),
    };
    let (windows, f) = ingest_stage(&input, &cfg.ingest, out)?;
    files.extend(f);
    let (raw, f) = features_stage(&windows, cfg.features, &cfg.sax, out)?;
    files.extend(f);
    let (normalized, set, f) = cluster_stage(&raw, cfg.features, &cfg.cluster, out)?;
    files.extend(f);
    for (a, e) in &set.failures {
        log::warn!("{a} failed: {e}");
    }
    let (_, f) = report_stage(&normalized, &set, cfg.cluster.mia_raw, out)?;
    files.extend(f);
    if cfg.plots {
        files.extend(plot_stage(&set, cfg.plot_algorithm, Some(&windows), &cfg.sax, &cfg.ingest, out));
    }
    files.push(art::MANIFEST.into());
    let manifest = Manifest::new(cfg.clone(), files);
    write_json(&out.join(art::MANIFEST), &manifest)?;
    Ok(manifest)
}

fn run_cmd(c: RunCmd) -> Result<Manifest> {
    let cfg = run_config(&c)?;
    let manifest = run_pipeline(&cfg, &c.out_dir)?;
    println!("{} artifacts written to {}", manifest.artifacts.len(), c.out_dir.display());
    Ok(manifest)
}

/// Read a truth file written by `synth`: household id to archetype.
pub fn read_truth(path: &Path) -> Result<BTreeMap<String, String>> {
    use std::io::BufRead;
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    let mut out = BTreeMap::new();
    for line in BufReader::new(file).lines().skip(1) {
        let line = line.map_err(|e| CliError::read(path, e))?;
        if let Some((h, a)) = line.split_once(',') {
            out.insert(h.to_string(), a.to_string());
        }
    }
    Ok(out)
}
