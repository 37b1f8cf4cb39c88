//! Run the five methods on one normalised matrix.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{rf_dissimilarity_with, ForestOptions};
use super::kmeans::kmeans_run;
use super::som::SomOptions;
use super::{fuzzy_cmeans, hierarchical_ward, pam, som, Algorithm, ClusterError, FeatureMatrix, KmeansInit, Partition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub k: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub fuzzifier: f64,
    pub rf_trees: usize,
    pub kmeans_init: KmeansInit,
    pub som: SomOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            k: 8,
            seed: 0,
            algorithms: Algorithm::ALL.to_vec(),
            fuzzifier: 2.0,
            rf_trees: 500,
            kmeans_init: KmeansInit::Random,
            som: SomOptions::default(),
        }
    }
}

impl SuiteOptions {
    /// SOM grid for the requested `k`: the configured grid when it has `k`
    /// units, otherwise two rows when `k` is even and a single row when odd.
    pub fn som_grid(&self) -> SomOptions {
        let mut opts = self.som;
        if opts.cols * opts.rows != self.k {
            (opts.cols, opts.rows) = if self.k.is_multiple_of(2) && self.k > 2 { (self.k / 2, 2) } else { (self.k, 1) };
        }
        opts
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub partitions: BTreeMap<Algorithm, Partition>,
    /// Error message per algorithm that failed.
    pub failures: BTreeMap<Algorithm, String>,
}

fn run_one(matrix: &FeatureMatrix, algorithm: Algorithm, opts: &SuiteOptions) -> Result<Partition, ClusterError> {
    let (k, seed) = (opts.k, opts.seed);
    match algorithm {
        Algorithm::Kmeans => kmeans_run(matrix, k, seed, opts.kmeans_init).map(|r| r.partition),
        Algorithm::Fuzzy => fuzzy_cmeans(matrix, k, opts.fuzzifier, seed),
        Algorithm::Som => som(matrix, &opts.som_grid(), seed),
        Algorithm::Hier => hierarchical_ward(matrix, k).map(|mut p| {
            p.seed = seed;
            p
        }),
        Algorithm::Rfpam => {
            if matrix.len() < k {
                return Err(ClusterError::TooFewRows { rows: matrix.len(), needed: k });
            }
            let forest = ForestOptions {
                trees: opts.rf_trees,
                mtry: None,
            };
            let dissim = rf_dissimilarity_with(matrix, &forest, seed)?;
            let mut p = pam(&dissim, k, seed)?;
            p.centers = Some(super::label_means(
                &matrix.rows,
                &p.labels.iter().map(|l| l - 1).collect::<Vec<_>>(),
                k,
            ));
            p.parameters.insert("trees".into(), opts.rf_trees.to_string());
            Ok(p)
        }
    }
}

/// Run every requested algorithm independently (in parallel). Failures are
/// collected rather than aborting the suite.
pub fn run_suite(matrix: &FeatureMatrix, opts: &SuiteOptions) -> SuiteResult {
    let outcomes: Vec<(Algorithm, Result<Partition, ClusterError>)> = opts
        .algorithms
        .par_iter()
        .map(|&a| (a, run_one(matrix, a, opts)))
        .collect();
    let mut result = SuiteResult::default();
    for (a, outcome) in outcomes {
        match outcome {
            Ok(p) => {
                result.partitions.insert(a, p);
            }
            Err(e) => {
                log::warn!("{a} failed: {e}");
                result.failures.insert(a, e.to_string());
            }
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn blobs() -> FeatureMatrix {
        let mut rng = stream_rng(21, 0);
        let mut rows = Vec::new();
        for b in 0..8 {
            for _ in 0..6 {
                rows.push((0..3).map(|d| if (b >> d) & 1 == 1 { 1.0 } else { 0.0 } + rng.random_range(-0.05..0.05)).collect());
            }
        }
        let m = FeatureMatrix::from_rows(rows).unwrap();
        super::super::minmax_normalize(&m)
    }

    #[test]
    fn all_five_with_k_clusters() {
        let opts = SuiteOptions {
            rf_trees: 100,
            seed: 3,
            ..SuiteOptions::default()
        };
        let m = blobs();
        let r = run_suite(&m, &opts);
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.partitions.len(), 5);
        for p in r.partitions.values() {
            assert_eq!(p.k, 8);
            assert_eq!(p.len(), m.len());
            assert_eq!(p.seed, 3);
        }
        assert_eq!(r, run_suite(&m, &opts));
    }

    #[test]
    fn k_above_rows_fails_everywhere() {
        let m = FeatureMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let r = run_suite(&m, &SuiteOptions::default());
        assert!(r.partitions.is_empty());
        assert_eq!(r.failures.len(), 5);
    }

    #[test]
    fn som_grid_follows_k() {
        let mut o = SuiteOptions::default();
        assert_eq!((o.som_grid().cols, o.som_grid().rows), (4, 2));
        o.k = 6;
        assert_eq!((o.som_grid().cols, o.som_grid().rows), (3, 2));
        o.k = 5;
        assert_eq!((o.som_grid().cols, o.som_grid().rows), (5, 1));
    }
}
