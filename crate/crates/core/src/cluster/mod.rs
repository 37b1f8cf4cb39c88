//! Household clustering: min-max normalisation and the five partitioning
//! methods (k-means, fuzzy c-means, hexagonal SOM, Ward hierarchical, and
//! random-forest dissimilarity with PAM), plus a suite runner.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod forest;
pub mod fuzzy;
pub mod kmeans;
mod matrix;
pub mod pam;
pub mod som;
pub mod suite;
pub mod ward;

pub use forest::rf_dissimilarity;
pub use fuzzy::fuzzy_cmeans;
pub use kmeans::{kmeans, KmeansInit};
pub use matrix::{minmax_normalize, FeatureMatrix};
pub use pam::pam;
pub use som::som;
pub use suite::{run_suite, SuiteOptions, SuiteResult};
pub use ward::hierarchical_ward;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("need at least {needed} rows, have {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// The five clustering methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kmeans,
    Fuzzy,
    Som,
    Hier,
    Rfpam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Kmeans,
        Algorithm::Fuzzy,
        Algorithm::Som,
        Algorithm::Hier,
        Algorithm::Rfpam,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Fuzzy => "fuzzy",
            Algorithm::Som => "som",
            Algorithm::Hier => "hier",
            Algorithm::Rfpam => "rfpam",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

/// Assignment of every row of a feature matrix to one of `k` clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Producing method, or a free-form tag for external labellings.
    pub algorithm: String,
    pub k: usize,
    /// Cluster label per row, in `1..=k`.
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    /// Row-stochastic membership degrees (fuzzy methods only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memberships: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl Partition {
    /// A bare partition from 1-based labels.
    pub fn from_labels(algorithm: &str, k: usize, labels: Vec<usize>) -> Result<Self, ClusterError> {
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > k) {
            return Err(ClusterError::Parameter(format!("label {bad} outside 1..={k}")));
        }
        Ok(Partition {
            algorithm: algorithm.to_string(),
            k,
            labels,
            centers: None,
            memberships: None,
            seed: 0,
            parameters: BTreeMap::new(),
        })
    }

    pub(crate) fn from_zero_based(algorithm: Algorithm, k: usize, labels: &[usize], seed: u64) -> Self {
        Partition {
            algorithm: algorithm.name().to_string(),
            k,
            labels: labels.iter().map(|l| l + 1).collect(),
            centers: None,
            memberships: None,
            seed,
            parameters: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member count per label `1..=k`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }
}

/// Symmetric, non-negative dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    pub ids: Vec<String>,
    pub d: Vec<Vec<f64>>,
}

impl DissimilarityMatrix {
    pub fn new(ids: Vec<String>, d: Vec<Vec<f64>>) -> Result<Self, ClusterError> {
        let n = ids.len();
        if d.len() != n || d.iter().any(|r| r.len() != n) {
            return Err(ClusterError::Shape(format!("dissimilarity matrix is not {n}x{n}")));
        }
        for i in 0..n {
            if d[i][i] != 0.0 {
                return Err(ClusterError::Shape(format!("non-zero diagonal at {i}")));
            }
            for j in 0..i {
                if d[i][j] != d[j][i] || d[i][j] < 0.0 || !d[i][j].is_finite() {
                    return Err(ClusterError::Shape(format!("entry ({i},{j}) not symmetric and non-negative")));
                }
            }
        }
        Ok(DissimilarityMatrix { ids, d })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; the lowest index wins ties.
pub(crate) fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Arithmetic mean of the rows carrying each label (0-based labels).
pub(crate) fn label_means(rows: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; width]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

pub(crate) fn require_rows(rows: usize, needed: usize) -> Result<(), ClusterError> {
    if needed == 0 {
        return Err(ClusterError::Parameter("k must be at least 1".into()));
    }
    if rows < needed {
        return Err(ClusterError::TooFewRows { rows, needed });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dbscan".parse::<Algorithm>().is_err());
    }

    #[test]
    fn partition_labels_are_checked() {
        assert!(Partition::from_labels("x", 2, vec![1, 2, 3]).is_err());
        assert!(Partition::from_labels("x", 2, vec![0]).is_err());
        let p = Partition::from_labels("x", 3, vec![1, 1, 3]).unwrap();
        assert_eq!(p.sizes(), vec![2, 0, 1]);
    }

    #[test]
    fn dissimilarity_checks() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(DissimilarityMatrix::new(ids.clone(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(DissimilarityMatrix::new(ids.clone(), vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(DissimilarityMatrix::new(ids, vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn nearest_prefers_lowest_index_on_ties() {
        let centers = vec![vec![1.0], vec![-1.0]];
        assert_eq!(nearest(&[0.0], &centers).0, 0);
    }
}
