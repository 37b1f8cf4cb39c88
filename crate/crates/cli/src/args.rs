use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use motifvar_core::cluster::{Algorithm, KmeansInit};
use motifvar_core::ingest::{DayType, HeaderMode, Season};
use motifvar_core::motif::FeatureKind;
use motifvar_core::pipeline::{ClusterParams, IngestParams};
use motifvar_core::sax::SaxParams;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "motifvar", version, about = "Motif-variability clustering of smart-meter load data")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log filter, e.g. `info` or `motifvar_core=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align raw readings and cut peak-period windows.
    Ingest(IngestCmd),
    /// Build a feature matrix from peak windows.
    Features(FeaturesCmd),
    /// Normalise a feature matrix and run the clustering suite.
    Cluster(ClusterCmd),
    /// Validity indices, consistency matrix and plots for a set of partitions.
    Report(ReportCmd),
    /// Generate synthetic readings from a scenario file.
    Synth(SynthCmd),
    /// Every stage end to end.
    Run(Box<RunCmd>),
}

#[derive(Debug, Args)]
pub struct IngestCmd {
    /// Reading CSV (`household_id,timestamp,watts`), optionally gzipped.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub ingest: IngestFlags,
}

#[derive(Debug, Args)]
pub struct FeaturesCmd {
    /// Window file written by `ingest`.
    #[arg(long)]
    pub windows: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "motif")]
    pub features: FeatureKind,
    #[command(flatten)]
    pub sax: SaxFlags,
}

#[derive(Debug, Args)]
pub struct ClusterCmd {
    /// Feature matrix written by `features`.
    #[arg(long = "matrix")]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub cluster: ClusterFlags,
}

#[derive(Debug, Args)]
pub struct ReportCmd {
    /// Feature matrix the partitions were built from (raw or normalised).
    #[arg(long = "matrix")]
    pub matrix: PathBuf,
    /// Partition file written by `cluster`.
    #[arg(long)]
    pub partitions: PathBuf,
    /// Window file, needed for the timing and profile plots.
    #[arg(long)]
    pub windows: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Use the per-cluster sum form of MIA instead of the per-cluster mean.
    #[arg(long)]
    pub mia_raw: bool,
    /// Partition drawn in the plots.
    #[arg(long, default_value = "kmeans")]
    pub plot_algorithm: Algorithm,
    #[command(flatten)]
    pub sax: SaxFlags,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    /// TOML scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunCmd {
    /// Reading CSV.
    #[arg(long, conflicts_with = "scenario")]
    pub input: Option<PathBuf>,
    /// Generate the input from this scenario instead of reading a file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Start from a manifest of an earlier run; other flags override it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub features: Option<FeatureKind>,
    #[arg(long)]
    pub plot_algorithm: Option<Algorithm>,
    /// Skip SVG plots.
    #[arg(long)]
    pub no_plots: bool,
    #[command(flatten)]
    pub ingest: IngestFlags,
    #[command(flatten)]
    pub sax: SaxFlags,
    #[command(flatten)]
    pub cluster: ClusterFlags,
}

/// `all` or a concrete value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrAll<T>(pub Option<T>);

impl<T: std::str::FromStr<Err = String>> std::str::FromStr for OrAll<T> {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            Ok(OrAll(None))
        } else {
            s.parse().map(|v| OrAll(Some(v)))
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct IngestFlags {
    /// Peak period start, local `HH:MM`.
    #[arg(long)]
    pub peak_start: Option<String>,
    #[arg(long)]
    pub peak_end: Option<String>,
    /// spring, summer, autumn, winter or all.
    #[arg(long)]
    pub season: Option<OrAll<Season>>,
    /// working, weekend, holiday or all.
    #[arg(long)]
    pub day_type: Option<OrAll<DayType>>,
    /// Households need at least this many valid days.
    #[arg(long)]
    pub min_days: Option<usize>,
    /// Raw intervals longer than this are gaps.
    #[arg(long)]
    pub max_gap_minutes: Option<i64>,
    /// IANA zone for local clock times and naive timestamps.
    #[arg(long)]
    pub timezone: Option<String>,
    /// Holiday list (one ISO date per line) replacing the bundled list.
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    /// present, absent or auto.
    #[arg(long, value_parser = parse_header)]
    pub header: Option<HeaderMode>,
    /// Fail when more than this fraction of rows is malformed.
    #[arg(long)]
    pub max_reject_fraction: Option<f64>,
}

fn parse_header(s: &str) -> std::result::Result<HeaderMode, String> {
    match s {
        "present" => Ok(HeaderMode::Present),
        "absent" => Ok(HeaderMode::Absent),
        "auto" => Ok(HeaderMode::Auto),
        other => Err(format!("unknown header mode `{other}`")),
    }
}

impl IngestFlags {
    pub fn apply(&self, p: &mut IngestParams) {
        if let Some(v) = &self.peak_start {
            p.peak_start = v.clone();
        }
        if let Some(v) = &self.peak_end {
            p.peak_end = v.clone();
        }
        if let Some(OrAll(v)) = self.season {
            p.season = v;
        }
        if let Some(OrAll(v)) = self.day_type {
            p.day_type = v;
        }
        if let Some(v) = self.min_days {
            p.min_days = v;
        }
        if let Some(v) = self.max_gap_minutes {
            p.max_gap_minutes = v;
        }
        if let Some(v) = &self.timezone {
            p.timezone = v.clone();
        }
        if let Some(v) = &self.holidays {
            p.holidays = Some(v.clone());
        }
        if let Some(v) = self.header {
            p.header = v;
        }
        if let Some(v) = self.max_reject_fraction {
            p.max_reject_fraction = v;
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct SaxFlags {
    #[arg(long)]
    pub alphabet: Option<usize>,
    #[arg(long)]
    pub motif_len: Option<usize>,
    /// Windows whose raw delta range is below this are not symbolised.
    #[arg(long)]
    pub noise_floor_watts: Option<f64>,
    /// Also use the window that ends on the last delta of the day.
    #[arg(long)]
    pub include_final_window: bool,
}

impl SaxFlags {
    pub fn apply(&self, p: &mut SaxParams) -> Result<()> {
        if let Some(v) = self.alphabet {
            p.alphabet_size = v;
        }
        if let Some(v) = self.motif_len {
            p.motif_len = v;
        }
        if let Some(v) = self.noise_floor_watts {
            p.noise_floor_watts = v;
        }
        if self.include_final_window {
            p.include_final_window = true;
        }
        p.validate().map_err(|e| CliError::config(e.to_string()))
    }
}

#[derive(Debug, Args, Default)]
pub struct ClusterFlags {
    /// Number of clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated subset of kmeans,fuzzy,som,hier,rfpam.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<Algorithm>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub fuzzifier: Option<f64>,
    #[arg(long)]
    pub rf_trees: Option<usize>,
    /// k-means seeding: random or kmeanspp.
    #[arg(long)]
    pub init: Option<KmeansInit>,
    /// Use the per-cluster sum form of MIA.
    #[arg(long)]
    pub mia_raw: bool,
}

impl ClusterFlags {
    pub fn apply(&self, p: &mut ClusterParams) -> Result<()> {
        if let Some(v) = self.k {
            p.k = v;
        }
        if let Some(v) = &self.algorithms {
            p.algorithms = v.clone();
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        if let Some(v) = self.fuzzifier {
            p.fuzzifier = v;
        }
        if let Some(v) = self.rf_trees {
            p.rf_trees = v;
        }
        if let Some(v) = self.init {
            p.init = v;
        }
        if self.mia_raw {
            p.mia_raw = true;
        }
        if p.k < 2 {
            return Err(CliError::config("k must be at least 2"));
        }
        if p.algorithms.is_empty() {
            return Err(CliError::config("no algorithms selected"));
        }
        if p.fuzzifier.is_nan() || p.fuzzifier <= 1.0 {
            return Err(CliError::config("fuzzifier must exceed 1"));
        }
        if p.rf_trees == 0 {
            return Err(CliError::config("rf-trees must be positive"));
        }
        Ok(())
    }
}
