//! File names, readers and writers for everything a run leaves on disk.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use motifvar_core::cluster::{Algorithm, FeatureMatrix, Partition};
use motifvar_core::ingest::{read_windows_csv, PeakDayWindow};
use motifvar_core::motif::FeatureKind;
use motifvar_core::pipeline::{ClusterParams, IngestParams};
use motifvar_core::sax::SaxParams;
use serde::{Deserialize, Serialize};

use crate::error::{Category, CliError, Result};

pub const READINGS: &str = "readings.csv";
pub const TRUTH: &str = "truth.csv";
pub const WINDOWS: &str = "windows.csv";
pub const DROPPED: &str = "dropped.csv";
pub const FEATURES: &str = "features.csv";
pub const NORMALIZED: &str = "features-normalized.csv";
pub const MOTIFS: &str = "motifs.csv";
pub const PARTITIONS_CSV: &str = "partitions.csv";
pub const PARTITIONS_JSON: &str = "partitions.json";
pub const VALIDITY_JSON: &str = "validity.json";
pub const QUALITY_CSV: &str = "quality.csv";
pub const RAND_CSV: &str = "rand.csv";
pub const MANIFEST: &str = "manifest.json";
pub const PLOT_DIR: &str = "plots";

/// Partitions from one suite run, keyed to the matrix rows by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSet {
    pub features: FeatureKind,
    pub household_ids: Vec<String>,
    pub partitions: Vec<Partition>,
    /// Error text for algorithms that failed.
    pub failures: BTreeMap<Algorithm, String>,
}

impl PartitionSet {
    pub fn get(&self, algorithm: Algorithm) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.algorithm == algorithm.name())
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub features: FeatureKind,
    pub ingest: IngestParams,
    pub sax: SaxParams,
    pub cluster: ClusterParams,
    pub plot_algorithm: Algorithm,
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            scenario: None,
            features: FeatureKind::Motif,
            ingest: IngestParams::default(),
            sax: SaxParams::default(),
            cluster: ClusterParams::default(),
            plot_algorithm: Algorithm::Kmeans,
            plots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(config: RunConfig, artifacts: Vec<String>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            artifacts,
        }
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::new(Category::InvalidInput, format!("{}: {e}", path.display())))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

/// Write a file through a buffered writer, mapping failures to the output category.
pub fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::write(path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(|e| CliError::write(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::new(Category::InvalidInput, format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    FeatureMatrix::read_csv(BufReader::new(file))
        .map_err(|e| CliError::new(Category::InvalidInput, format!("{}: {e}", path.display())))
}

pub fn read_windows(path: &Path) -> Result<BTreeMap<String, Vec<PeakDayWindow>>> {
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    Ok(read_windows_csv(BufReader::new(file))?)
}

/// Which representation a matrix holds, from its column names.
pub fn infer_kind(matrix: &FeatureMatrix) -> Option<FeatureKind> {
    match matrix.columns.first().map(String::as_str) {
        Some("f1") => Some(FeatureKind::Motif),
        Some("p00") => Some(FeatureKind::Profile),
        Some("tmax_sd") => Some(FeatureKind::Nonmotif),
        _ => None,
    }
}

/// Long-format partition table: `household_id,algorithm,cluster`.
pub fn write_partitions_csv<W: Write>(mut out: W, set: &PartitionSet) -> std::io::Result<()> {
    writeln!(out, "household_id,algorithm,cluster")?;
    for p in &set.partitions {
        for (id, label) in set.household_ids.iter().zip(&p.labels) {
            writeln!(out, "{id},{},{label}", p.algorithm)?;
        }
    }
    Ok(())
}

pub fn write_dropped_csv<W: Write>(mut out: W, dropped: &[(String, String)]) -> std::io::Result<()> {
    writeln!(out, "household_id,reason")?;
    for (id, reason) in dropped {
        writeln!(out, "{id},\"{}\"", reason.replace('"', "'"))?;
    }
    Ok(())
}
