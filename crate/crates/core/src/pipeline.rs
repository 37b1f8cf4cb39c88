//! Stage glue: readings to windows, windows to features, features to
//! partitions and validity. File handling lives in the CLI.

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveTime;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::cluster::{minmax_normalize, run_suite, Algorithm, ClusterError, FeatureMatrix, KmeansInit, Partition, SuiteOptions, SuiteResult};
use crate::ingest::{
    self, AlignOptions, DayType, HeaderMode, IngestConfig, IngestError, IngestOutcome, ParseOptions, PeakDayWindow, PeakFilter,
    RawReading, Season,
};
use crate::motif::{feature_matrix, FeatureError, FeatureKind};
use crate::sax::SaxParams;
use crate::validity::{consistency_report, ValidityError, ValidityReport};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("every algorithm failed: {0}")]
    AllFailed(String),
}

/// Ingest parameters in a serialisable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestParams {
    pub peak_start: String,
    pub peak_end: String,
    /// `None` keeps every season.
    pub season: Option<Season>,
    pub day_type: Option<DayType>,
    pub min_days: usize,
    pub max_gap_minutes: i64,
    pub timezone: String,
    /// Holiday list file; `None` uses the bundled Scottish 2011 list.
    pub holidays: Option<PathBuf>,
    pub header: HeaderMode,
    pub max_reject_fraction: f64,
}

impl Default for IngestParams {
    fn default() -> Self {
        IngestParams {
            peak_start: "16:00".into(),
            peak_end: "20:00".into(),
            season: Some(Season::Spring),
            day_type: Some(DayType::Working),
            min_days: 4,
            max_gap_minutes: 15,
            timezone: "Europe/London".into(),
            holidays: None,
            header: HeaderMode::Auto,
            max_reject_fraction: 0.10,
        }
    }
}

fn clock(s: &str) -> Result<NaiveTime, PipelineError> {
    NaiveTime::parse_from_str(s, "%H:%M").map_err(|_| PipelineError::Config(format!("bad clock time `{s}`")))
}

impl IngestParams {
    pub fn timezone(&self) -> Result<Tz, PipelineError> {
        self.timezone
            .parse()
            .map_err(|_| PipelineError::Config(format!("unknown timezone `{}`", self.timezone)))
    }

    pub fn parse_options(&self) -> Result<ParseOptions, PipelineError> {
        if !(0.0..=1.0).contains(&self.max_reject_fraction) {
            return Err(PipelineError::Config("reject fraction must lie in [0, 1]".into()));
        }
        Ok(ParseOptions {
            header: self.header,
            max_reject_fraction: self.max_reject_fraction,
            timezone: self.timezone()?,
        })
    }

    pub fn to_config(&self) -> Result<IngestConfig, PipelineError> {
        if self.max_gap_minutes <= 0 {
            return Err(PipelineError::Config("max gap must be positive".into()));
        }
        Ok(IngestConfig {
            align: AlignOptions {
                max_gap_seconds: self.max_gap_minutes * 60,
            },
            filter: PeakFilter {
                season: self.season,
                day_type: self.day_type,
                peak_start: clock(&self.peak_start)?,
                peak_end: clock(&self.peak_end)?,
            },
            holidays: match &self.holidays {
                None => ingest::scotland_2011_holidays(),
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                        std::io::ErrorKind::NotFound => IngestError::NotFound(path.display().to_string()),
                        _ => IngestError::Io(e),
                    })?;
                    ingest::parse_holidays(&text)?
                }
            },
            timezone: self.timezone()?,
            min_days: self.min_days,
        })
    }
}

/// Clustering and validity parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    pub k: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub fuzzifier: f64,
    pub rf_trees: usize,
    pub init: KmeansInit,
    pub mia_raw: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        let s = SuiteOptions::default();
        ClusterParams {
            k: s.k,
            seed: s.seed,
            algorithms: s.algorithms,
            fuzzifier: s.fuzzifier,
            rf_trees: s.rf_trees,
            init: s.kmeans_init,
            mia_raw: false,
        }
    }
}

impl ClusterParams {
    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            k: self.k,
            seed: self.seed,
            algorithms: self.algorithms.clone(),
            fuzzifier: self.fuzzifier,
            rf_trees: self.rf_trees,
            kmeans_init: self.init,
            ..SuiteOptions::default()
        }
    }
}

pub fn windows(readings: Vec<RawReading>, params: &IngestParams) -> Result<IngestOutcome, PipelineError> {
    Ok(ingest::ingest(readings, &params.to_config()?)?)
}

/// Raw feature matrix of the requested kind.
pub fn features(
    windows: &BTreeMap<String, Vec<PeakDayWindow>>,
    kind: FeatureKind,
    sax: &SaxParams,
) -> Result<FeatureMatrix, PipelineError> {
    Ok(feature_matrix(kind, windows, sax)?)
}

/// Normalise, run the suite and evaluate whatever succeeded.
pub struct Clustered {
    pub normalized: FeatureMatrix,
    pub suite: SuiteResult,
    /// `None` when fewer than two algorithms succeeded.
    pub report: Option<ValidityReport>,
}

pub fn cluster_and_evaluate(raw: &FeatureMatrix, kind: FeatureKind, params: &ClusterParams) -> Result<Clustered, PipelineError> {
    let normalized = minmax_normalize(raw);
    let suite = run_suite(&normalized, &params.suite_options());
    if suite.partitions.is_empty() {
        let why: Vec<String> = suite.failures.iter().map(|(a, e)| format!("{a}: {e}")).collect();
        return Err(PipelineError::AllFailed(why.join("; ")));
    }
    let parts: Vec<Partition> = suite.partitions.values().cloned().collect();
    let report = if parts.len() >= 2 {
        Some(consistency_report(&kind.to_string(), &parts, &normalized, params.mia_raw)?)
    } else {
        None
    };
    Ok(Clustered {
        normalized,
        suite,
        report,
    })
}
