//! Cluster quality and cross-partition consistency: record distance,
//! within-set distance, MIA, CDI, and the corrected (adjusted) Rand index.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::cluster::{FeatureMatrix, Partition};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidityError {
    #[error("width mismatch: {0} vs {1}")]
    Width(usize, usize),
    #[error("empty record set")]
    Empty,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("partition covers {partition} rows but the matrix has {matrix}")]
    Size { partition: usize, matrix: usize },
    #[error("need at least {0} items")]
    TooFew(usize),
}

/// Root of the mean squared attribute difference.
pub fn record_distance(a: &[f64], b: &[f64]) -> Result<f64, ValidityError> {
    if a.len() != b.len() {
        return Err(ValidityError::Width(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(ValidityError::Empty);
    }
    Ok(sq_record_distance(a, b).sqrt())
}

fn sq_record_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `sqrt(1/(2N) * sum over ordered pairs of d^2)`.
pub fn within_set_distance(set: &[Vec<f64>]) -> Result<f64, ValidityError> {
    let n = set.len();
    if n == 0 {
        return Err(ValidityError::Empty);
    }
    let width = set[0].len();
    if let Some(r) = set.iter().find(|r| r.len() != width) {
        return Err(ValidityError::Width(width, r.len()));
    }
    if width == 0 {
        return Err(ValidityError::Empty);
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..i {
            total += 2.0 * sq_record_distance(&set[i], &set[j]);
        }
    }
    Ok((total / (2 * n) as f64).sqrt())
}

/// Member rows of each cluster, indexed by label - 1.
fn members<'a>(partition: &Partition, matrix: &'a FeatureMatrix) -> Result<Vec<Vec<&'a [f64]>>, ValidityError> {
    if partition.len() != matrix.len() {
        return Err(ValidityError::Size {
            partition: partition.len(),
            matrix: matrix.len(),
        });
    }
    let mut groups = vec![Vec::new(); partition.k];
    for (row, &l) in matrix.rows.iter().zip(&partition.labels) {
        groups[l - 1].push(row.as_slice());
    }
    if let Some(empty) = groups.iter().position(Vec::is_empty) {
        return Err(ValidityError::EmptyCluster(empty + 1));
    }
    Ok(groups)
}

fn mean_of(rows: &[&[f64]]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect()
}

/// Arithmetic mean of every cluster's members.
pub fn cluster_means(partition: &Partition, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>, ValidityError> {
    Ok(members(partition, matrix)?.iter().map(|g| mean_of(g)).collect())
}

/// Mean index adequacy: RMS over clusters of each cluster's RMS distance to
/// its mean. With `raw`, the per-cluster sums are not divided by the
/// cluster size, so large clusters weigh more.
pub fn mia_with(partition: &Partition, matrix: &FeatureMatrix, raw: bool) -> Result<f64, ValidityError> {
    let groups = members(partition, matrix)?;
    let mut total = 0.0;
    for g in &groups {
        let c = mean_of(g);
        let s: f64 = g.iter().map(|r| sq_record_distance(r, &c)).sum();
        total += if raw { s } else { s / g.len() as f64 };
    }
    Ok((total / groups.len() as f64).sqrt())
}

pub fn mia(partition: &Partition, matrix: &FeatureMatrix) -> Result<f64, ValidityError> {
    mia_with(partition, matrix, false)
}

/// Clustering dispersion indicator. `None` when all cluster means coincide.
pub fn cdi(partition: &Partition, matrix: &FeatureMatrix) -> Result<Option<f64>, ValidityError> {
    let groups = members(partition, matrix)?;
    if groups.len() < 2 {
        return Err(ValidityError::TooFew(2));
    }
    let centers: Vec<Vec<f64>> = groups.iter().map(|g| mean_of(g)).collect();
    let spread = within_set_distance(&centers)?;
    if spread == 0.0 {
        return Ok(None);
    }
    let mut total = 0.0;
    for g in &groups {
        let owned: Vec<Vec<f64>> = g.iter().map(|r| r.to_vec()).collect();
        total += within_set_distance(&owned)?.powi(2);
    }
    Ok(Some((total / groups.len() as f64).sqrt() / spread))
}

fn choose2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index of two labellings of the same items.
///
/// When both labellings put every item in one cluster, or both use
/// singletons, the index is defined as 1.
pub fn corrected_rand(p: &[usize], q: &[usize]) -> Result<f64, ValidityError> {
    if p.len() != q.len() {
        return Err(ValidityError::Size {
            partition: p.len(),
            matrix: q.len(),
        });
    }
    let n = p.len();
    if n < 2 {
        return Err(ValidityError::TooFew(2));
    }
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&a, &b) in p.iter().zip(q) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Relabel so only populated clusters remain, numbered by first appearance
/// of their original label order.
pub fn drop_empty_clusters(partition: &Partition) -> Partition {
    let sizes = partition.sizes();
    let mut map = vec![0; partition.k + 1];
    let mut next = 0;
    for (l, &s) in sizes.iter().enumerate() {
        if s > 0 {
            next += 1;
            map[l + 1] = next;
        }
    }
    let mut out = partition.clone();
    out.k = next;
    out.labels = partition.labels.iter().map(|&l| map[l]).collect();
    if let Some(c) = &partition.centers {
        out.centers = Some(
            c.iter()
                .enumerate()
                .filter(|(l, _)| sizes[*l] > 0)
                .map(|(_, v)| v.clone())
                .collect(),
        );
    }
    if let Some(u) = &partition.memberships {
        out.memberships = Some(
            u.iter()
                .map(|row| row.iter().enumerate().filter(|(l, _)| sizes[*l] > 0).map(|(_, v)| *v).collect())
                .collect(),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionQuality {
    pub algorithm: String,
    /// Member counts, ascending; empty clusters are included as zeros.
    pub sizes: Vec<usize>,
    /// Clusters with no members; MIA and CDI are computed over the rest.
    pub empty_clusters: usize,
    pub mia: f64,
    /// `None` when the cluster means coincide.
    pub cdi: Option<f64>,
    pub cdi_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub features: String,
    pub households: usize,
    pub mia_form: String,
    pub partitions: Vec<PartitionQuality>,
    /// Algorithm names in matrix order.
    pub rand_labels: Vec<String>,
    pub rand_matrix: Vec<Vec<f64>>,
    pub mean_offdiagonal_rand: f64,
}

pub fn partition_quality(partition: &Partition, matrix: &FeatureMatrix, mia_raw: bool) -> Result<PartitionQuality, ValidityError> {
    let mut sizes = partition.sizes();
    let empty_clusters = sizes.iter().filter(|&&s| s == 0).count();
    sizes.sort_unstable();
    let populated = drop_empty_clusters(partition);
    let mia = mia_with(&populated, matrix, mia_raw)?;
    let cdi = if populated.k >= 2 { cdi(&populated, matrix)? } else { None };
    Ok(PartitionQuality {
        algorithm: partition.algorithm.clone(),
        sizes,
        empty_clusters,
        mia,
        cdi,
        cdi_undefined: cdi.is_none(),
    })
}

/// Per-partition quality plus the pairwise corrected Rand matrix.
pub fn consistency_report(
    features: &str,
    partitions: &[Partition],
    matrix: &FeatureMatrix,
    mia_raw: bool,
) -> Result<ValidityReport, ValidityError> {
    if partitions.len() < 2 {
        return Err(ValidityError::TooFew(2));
    }
    let quality = partitions
        .iter()
        .map(|p| partition_quality(p, matrix, mia_raw))
        .collect::<Result<Vec<_>, _>>()?;
    let m = partitions.len();
    let mut rand = vec![vec![1.0; m]; m];
    let mut off = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let r = corrected_rand(&partitions[i].labels, &partitions[j].labels)?;
            rand[i][j] = r;
            rand[j][i] = r;
            off.push(r);
        }
    }
    Ok(ValidityReport {
        features: features.to_string(),
        households: matrix.len(),
        mia_form: if mia_raw { "raw" } else { "normalized" }.to_string(),
        partitions: quality,
        rand_labels: partitions.iter().map(|p| p.algorithm.clone()).collect(),
        rand_matrix: rand,
        mean_offdiagonal_rand: off.iter().sum::<f64>() / off.len() as f64,
    })
}

impl ValidityReport {
    /// One row per partition: `features,algorithm,sizes,mia,cdi`, sizes
    /// joined with `;` and an undefined CDI written as `NA`.
    pub fn write_quality_csv<W: Write>(&self, mut out: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(out, "features,algorithm,sizes,mia,cdi")?;
        }
        for q in &self.partitions {
            let sizes: Vec<String> = q.sizes.iter().map(ToString::to_string).collect();
            let cdi = q.cdi.map_or_else(|| "NA".to_string(), |c| format!("{c:.6}"));
            writeln!(out, "{},{},{},{:.6},{}", self.features, q.algorithm, sizes.join(";"), q.mia, cdi)?;
        }
        Ok(())
    }

    /// The corrected Rand matrix with a header row of algorithm names and a
    /// final `mean_offdiagonal` line.
    pub fn write_rand_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "algorithm,{}", self.rand_labels.join(","))?;
        for (name, row) in self.rand_labels.iter().zip(&self.rand_matrix) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(out, "{name},{}", cells.join(","))?;
        }
        writeln!(out, "mean_offdiagonal,{:.6}", self.mean_offdiagonal_rand)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn part(labels: &[usize], k: usize) -> Partition {
        Partition::from_labels("t", k, labels.to_vec()).unwrap()
    }

    fn mat(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    /// Agreement over all unordered pairs, adjusted with the permutation
    /// expectation computed independently from pair counts.
    fn brute_ari(p: &[usize], q: &[usize]) -> f64 {
        let n = p.len();
        let (mut both, mut in_p, mut in_q) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sp = p[i] == p[j];
                let sq = q[i] == q[j];
                both += (sp && sq) as u8 as f64;
                in_p += sp as u8 as f64;
                in_q += sq as u8 as f64;
            }
        }
        let pairs = (n * (n - 1) / 2) as f64;
        let expected = in_p * in_q / pairs;
        let max = (in_p + in_q) / 2.0;
        if max == expected {
            1.0
        } else {
            (both - expected) / (max - expected)
        }
    }

    #[test]
    fn distance_cases() {
        assert_eq!(record_distance(&[1.0, 1.0], &[3.0, 3.0]).unwrap(), 2.0);
        assert_eq!(record_distance(&[0.4, 2.0], &[0.4, 2.0]).unwrap(), 0.0);
        assert!(record_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn within_set_cases() {
        assert_eq!(within_set_distance(&[vec![3.0, 1.0]]).unwrap(), 0.0);
        assert_eq!(within_set_distance(&vec![vec![2.0]; 5]).unwrap(), 0.0);
        assert!((within_set_distance(&[vec![0.0], vec![2.0]]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(within_set_distance(&[]).is_err());
    }

    #[test]
    fn mia_cases() {
        let m = mat(vec![vec![0.0], vec![2.0], vec![10.0]]);
        let v = mia(&part(&[1, 1, 2], 2), &m).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12);
        // raw form: cluster sum 2 instead of mean 1
        assert!((mia_with(&part(&[1, 1, 2], 2), &m, true).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mia(&part(&[1, 2, 3], 3), &m).unwrap(), 0.0);
        assert_eq!(mia(&part(&[1, 2, 1], 2), &mat(vec![vec![4.0]; 3])).unwrap(), 0.0);
        assert_eq!(mia(&part(&[1, 1, 1], 2), &m), Err(ValidityError::EmptyCluster(2)));
    }

    #[test]
    fn cdi_cases() {
        let m = mat(vec![vec![0.0], vec![2.0]]);
        assert_eq!(cdi(&part(&[1, 2], 2), &m).unwrap(), Some(0.0));
        let tight = mat(vec![vec![0.0], vec![0.0], vec![5.0], vec![5.0]]);
        assert_eq!(cdi(&part(&[1, 1, 2, 2], 2), &tight).unwrap(), Some(0.0));
        let same = mat(vec![vec![0.0], vec![2.0], vec![0.0], vec![2.0]]);
        assert_eq!(cdi(&part(&[1, 1, 2, 2], 2), &same).unwrap(), None);
    }

    #[test]
    fn cdi_falls_as_clusters_tighten() {
        let make = |s: f64| mat(vec![vec![-s], vec![s], vec![10.0 - s], vec![10.0 + s]]);
        let p = part(&[1, 1, 2, 2], 2);
        let a = cdi(&p, &make(2.0)).unwrap().unwrap();
        let b = cdi(&p, &make(1.0)).unwrap().unwrap();
        assert!(b < a);
    }

    #[test]
    fn ari_cases() {
        assert_eq!(corrected_rand(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap(), 1.0);
        assert!((corrected_rand(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap() + 0.5).abs() < 1e-12);
        assert!((brute_ari(&[1, 1, 2, 2], &[1, 2, 1, 2]) + 0.5).abs() < 1e-12);
        assert!(corrected_rand(&[1], &[1]).is_err());
    }

    #[test]
    fn ari_matches_pair_counting_on_all_small_partitions() {
        // every labelling of 5 items with labels 1..=3 against every other
        let n = 5;
        let all: Vec<Vec<usize>> = (0..3usize.pow(n as u32))
            .map(|mut code| {
                (0..n)
                    .map(|_| {
                        let l = code % 3 + 1;
                        code /= 3;
                        l
                    })
                    .collect()
            })
            .collect();
        for p in &all {
            for q in &all {
                let a = corrected_rand(p, q).unwrap();
                assert!((a - brute_ari(p, q)).abs() < 1e-12, "{p:?} {q:?}");
                assert!((a - corrected_rand(q, p).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ari_of_random_partitions_is_near_zero() {
        let mut total = 0.0;
        for seed in 0..100 {
            let mut rng = stream_rng(seed, 7);
            let p: Vec<usize> = (0..204).map(|_| rng.random_range(1..=8)).collect();
            let q: Vec<usize> = (0..204).map(|_| rng.random_range(1..=8)).collect();
            total += corrected_rand(&p, &q).unwrap().abs();
        }
        assert!(total / 100.0 < 0.05, "{}", total / 100.0);
    }

    #[test]
    fn report_shape() {
        let m = mat((0..10).map(|i| vec![i as f64, (i * i) as f64]).collect());
        let a = part(&[1, 1, 1, 2, 2, 2, 3, 3, 3, 3], 3);
        let mut b = a.clone();
        b.labels = a.labels.iter().map(|l| 4 - l).collect();
        let r = consistency_report("motif", &[a.clone(), b, a], &m, false).unwrap();
        assert_eq!(r.rand_matrix.len(), 3);
        assert!(r.rand_matrix.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_eq!(r.mean_offdiagonal_rand, 1.0);
        assert_eq!(r.partitions[0].sizes, vec![3, 3, 4]);
        assert_eq!(r.partitions[0].mia, r.partitions[1].mia);
        let mut csv = Vec::new();
        r.write_rand_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
    }

    #[test]
    fn empty_clusters_are_skipped_in_the_report() {
        let m = mat(vec![vec![0.0], vec![1.0], vec![5.0], vec![6.0]]);
        let p = part(&[1, 1, 3, 3], 3);
        let q = partition_quality(&p, &m, false).unwrap();
        assert_eq!(q.empty_clusters, 1);
        assert_eq!(q.sizes, vec![0, 2, 2]);
        assert!((q.mia - mia(&part(&[1, 1, 2, 2], 2), &m).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            c in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let d = |x: &[f64], y: &[f64]| record_distance(x, y).unwrap();
            prop_assert!(d(&a, &b) >= 0.0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }

        #[test]
        fn within_set_ignores_order(mut rows in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 1..12)) {
            let before = within_set_distance(&rows).unwrap();
            rows.reverse();
            prop_assert!((within_set_distance(&rows).unwrap() - before).abs() < 1e-12);
        }

        #[test]
        fn indices_ignore_relabelling(
            rows in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 2), 6..20),
            seed in 0u64..1000,
        ) {
            let n = rows.len();
            let mut rng = stream_rng(seed, 0);
            let mut labels: Vec<usize> = (0..n).map(|i| i % 3 + 1).collect();
            labels.rotate_left(rng.random_range(0..n));
            let perm = [0, 3, 1, 2];
            let relabelled: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
            let m = mat(rows);
            let (p, q) = (part(&labels, 3), part(&relabelled, 3));
            prop_assert!((mia(&p, &m).unwrap() - mia(&q, &m).unwrap()).abs() < 1e-12);
            match (cdi(&p, &m).unwrap(), cdi(&q, &m).unwrap()) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                (x, y) => prop_assert_eq!(x, y),
            }
            prop_assert!((corrected_rand(&labels, &relabelled).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
