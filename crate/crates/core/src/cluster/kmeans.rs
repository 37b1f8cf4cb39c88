//! Lloyd's k-means.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{label_means, nearest, require_rows, sq_dist, Algorithm, ClusterError, FeatureMatrix, Partition};
use crate::rng::{stream_rng, streams};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KmeansInit {
    /// `k` distinct rows drawn uniformly.
    #[default]
    Random,
    /// k-means++ seeding.
    Kmeanspp,
}

impl std::str::FromStr for KmeansInit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(KmeansInit::Random),
            "kmeanspp" => Ok(KmeansInit::Kmeanspp),
            other => Err(format!("unknown k-means init `{other}`")),
        }
    }
}

/// Partition plus the within-cluster sum of squares after every iteration.
#[derive(Debug, Clone)]
pub struct KmeansRun {
    pub partition: Partition,
    pub wcss_history: Vec<f64>,
}

pub fn kmeans(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<Partition, ClusterError> {
    kmeans_run(matrix, k, seed, KmeansInit::Random).map(|r| r.partition)
}

fn initial_centers(rows: &[Vec<f64>], k: usize, init: KmeansInit, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    match init {
        KmeansInit::Random => sample(rng, rows.len(), k).into_iter().map(|i| rows[i].clone()).collect(),
        KmeansInit::Kmeanspp => {
            let mut centers = vec![rows[rng.random_range(0..rows.len())].clone()];
            let mut dist: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
            while centers.len() < k {
                let total: f64 = dist.iter().sum();
                let next = if total > 0.0 {
                    let mut target = rng.random::<f64>() * total;
                    let mut pick = rows.len() - 1;
                    for (i, &d) in dist.iter().enumerate() {
                        if target < d {
                            pick = i;
                            break;
                        }
                        target -= d;
                    }
                    pick
                } else {
                    rng.random_range(0..rows.len())
                };
                centers.push(rows[next].clone());
                for (d, r) in dist.iter_mut().zip(rows) {
                    *d = d.min(sq_dist(r, &centers[centers.len() - 1]));
                }
            }
            centers
        }
    }
}

/// Full k-means run with an explicit initialisation scheme.
pub fn kmeans_run(matrix: &FeatureMatrix, k: usize, seed: u64, init: KmeansInit) -> Result<KmeansRun, ClusterError> {
    require_rows(matrix.len(), k)?;
    let rows = &matrix.rows;
    let mut rng = stream_rng(seed, streams::KMEANS);
    let mut centers = initial_centers(rows, k, init, &mut rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        let mut assigned: Vec<(usize, f64)> = rows.iter().map(|r| nearest(r, &centers)).collect();

        // repair empty clusters with the point farthest from its own center
        let mut counts = vec![0usize; k];
        for &(c, _) in &assigned {
            counts[c] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let far = (0..rows.len())
                .filter(|&i| counts[assigned[i].0] > 1)
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if assigned[b].1 >= assigned[i].1 => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                counts[assigned[i].0] -= 1;
                counts[empty] = 1;
                assigned[i] = (empty, 0.0);
                centers[empty] = rows[i].clone();
            }
        }

        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        centers = label_means(rows, &new_labels, k);
        let wcss: f64 = rows.iter().zip(&new_labels).map(|(r, &l)| sq_dist(r, &centers[l])).sum();
        history.push(wcss);
        let converged = new_labels == labels;
        labels = new_labels;
        if converged {
            break;
        }
    }

    let mut partition = Partition::from_zero_based(Algorithm::Kmeans, k, &labels, seed);
    partition.centers = Some(centers);
    partition
        .parameters
        .insert("init".into(), format!("{init:?}").to_lowercase());
    partition.parameters.insert("iterations".into(), history.len().to_string());
    Ok(KmeansRun {
        partition,
        wcss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(seed: u64, centers: &[[f64; 2]], per: usize, spread: f64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = stream_rng(seed, 99);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![
                    center[0] + rng.random_range(-spread..spread),
                    center[1] + rng.random_range(-spread..spread),
                ]);
                truth.push(c);
            }
        }
        (FeatureMatrix::from_rows(rows).unwrap(), truth)
    }

    fn wcss_of(rows: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
        let c = label_means(rows, labels, k);
        rows.iter().zip(labels).map(|(r, &l)| sq_dist(r, &c[l])).sum()
    }

    #[test]
    fn single_cluster_center_is_the_column_mean() {
        let m = FeatureMatrix::from_rows(vec![vec![0.0, 2.0], vec![2.0, 4.0], vec![4.0, 0.0]]).unwrap();
        let p = kmeans(&m, 1, 3).unwrap();
        assert_eq!(p.labels, vec![1, 1, 1]);
        assert_eq!(p.centers.unwrap()[0], vec![2.0, 2.0]);
    }

    #[test]
    fn separated_blobs_match_the_exhaustive_optimum() {
        let (m, _) = blobs(5, &[[0.0, 0.0], [10.0, 10.0]], 6, 0.5);
        let n = m.len();
        // exhaustive best 2-partition by WCSS
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1..(1u32 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let w = wcss_of(&m.rows, &labels, 2);
            if w < best.0 {
                best = (w, mask);
            }
        }
        let p = kmeans(&m, 2, 11).unwrap();
        let got: Vec<usize> = p.labels.iter().map(|l| l - 1).collect();
        assert!((wcss_of(&m.rows, &got, 2) - best.0).abs() < 1e-9);
        assert!(got[..6].iter().all(|&l| l == got[0]));
        assert!(got[6..].iter().all(|&l| l != got[0]));
    }

    #[test]
    fn same_seed_same_partition() {
        let (m, _) = blobs(8, &[[0.0, 0.0], [3.0, 1.0], [1.0, 4.0]], 10, 2.0);
        assert_eq!(kmeans(&m, 3, 42).unwrap(), kmeans(&m, 3, 42).unwrap());
    }

    #[test]
    fn too_few_rows() {
        let m = FeatureMatrix::from_rows(vec![vec![0.0]; 3]).unwrap();
        assert!(matches!(kmeans(&m, 4, 0), Err(ClusterError::TooFewRows { rows: 3, needed: 4 })));
    }

    #[test]
    fn empty_clusters_are_repaired() {
        // duplicated rows make empty clusters likely after the first assignment
        let mut rows = vec![vec![0.0, 0.0]; 6];
        rows.extend(vec![vec![1.0, 1.0]; 2]);
        rows.push(vec![5.0, 5.0]);
        let m = FeatureMatrix::from_rows(rows).unwrap();
        for seed in 0..20 {
            let p = kmeans(&m, 3, seed).unwrap();
            assert!(p.sizes().iter().all(|&s| s > 0), "seed {seed}: {:?}", p.sizes());
        }
    }

    #[test]
    fn wcss_never_increases() {
        for seed in 0..20 {
            let (m, _) = blobs(seed, &[[0.0, 0.0], [2.0, 1.0], [1.0, 3.0], [4.0, 4.0]], 15, 2.5);
            for init in [KmeansInit::Random, KmeansInit::Kmeanspp] {
                let run = kmeans_run(&m, 5, seed, init).unwrap();
                assert!(run.wcss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", run.wcss_history);
            }
        }
    }
}
