//! Partitioning around medoids: greedy BUILD followed by best-improvement SWAP.
//!
//! Both phases are deterministic (lowest index wins ties), so the seed is
//! only recorded on the partition.

use super::{require_rows, Algorithm, ClusterError, DissimilarityMatrix, Partition};

pub const MAX_SWAPS: usize = 1000;

#[derive(Debug, Clone)]
pub struct PamRun {
    pub partition: Partition,
    /// Row indices of the medoids, one per cluster.
    pub medoids: Vec<usize>,
    /// Total dissimilarity to the nearest medoid after BUILD and after each swap.
    pub cost_history: Vec<f64>,
}

pub fn pam(dissim: &DissimilarityMatrix, k: usize, seed: u64) -> Result<Partition, ClusterError> {
    pam_run(dissim, k, seed).map(|r| r.partition)
}

/// Total distance of every point to its nearest medoid.
pub fn total_cost(d: &[Vec<f64>], medoids: &[usize]) -> f64 {
    d.iter()
        .map(|row| medoids.iter().map(|&m| row[m]).fold(f64::INFINITY, f64::min))
        .sum()
}

fn build(d: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = d.len();
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::INFINITY);
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            let cost: f64 = (0..n).map(|i| nearest[i].min(d[i][c])).sum();
            if cost < best.1 {
                best = (c, cost);
            }
        }
        medoids.push(best.0);
        for i in 0..n {
            nearest[i] = nearest[i].min(d[i][best.0]);
        }
    }
    medoids
}

pub fn pam_run(dissim: &DissimilarityMatrix, k: usize, seed: u64) -> Result<PamRun, ClusterError> {
    let n = dissim.len();
    require_rows(n, k)?;
    let d = &dissim.d;
    let mut medoids = build(d, k);
    let mut cost = total_cost(d, &medoids);
    let mut history = vec![cost];

    for _ in 0..MAX_SWAPS {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for candidate in 0..n {
                if medoids.contains(&candidate) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = candidate;
                let c = total_cost(d, &trial);
                if c < best.map_or(cost, |b| b.2) - 1e-12 * cost.max(1.0) {
                    best = Some((slot, candidate, c));
                }
            }
        }
        let Some((slot, candidate, c)) = best else {
            break;
        };
        medoids[slot] = candidate;
        cost = c;
        history.push(cost);
    }

    let labels: Vec<usize> = d
        .iter()
        .map(|row| {
            let mut best = 0;
            for c in 1..k {
                if row[medoids[c]] < row[medoids[best]] {
                    best = c;
                }
            }
            best
        })
        .collect();
    let mut partition = Partition::from_zero_based(Algorithm::Rfpam, k, &labels, seed);
    partition.parameters.insert(
        "medoids".into(),
        medoids.iter().map(|&m| dissim.ids[m].clone()).collect::<Vec<_>>().join(";"),
    );
    Ok(PamRun {
        partition,
        medoids,
        cost_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("h{i}")).collect()
    }

    fn euclid(points: &[(f64, f64)]) -> DissimilarityMatrix {
        let d = points
            .iter()
            .map(|a| points.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
            .collect();
        DissimilarityMatrix::new(ids(points.len()), d).unwrap()
    }

    #[test]
    fn saturated_k_gives_zero_cost() {
        let m = euclid(&[(0.0, 0.0), (1.0, 0.0), (3.0, 2.0)]);
        let run = pam_run(&m, 3, 0).unwrap();
        assert_eq!(*run.cost_history.last().unwrap(), 0.0);
        let mut labels = run.partition.labels.clone();
        labels.sort();
        assert_eq!(labels, vec![1, 2, 3]);
    }

    #[test]
    fn two_groups_match_exhaustive_medoid_pairs() {
        let d = vec![
            vec![0.0, 0.1, 0.9, 0.8],
            vec![0.1, 0.0, 0.85, 0.95],
            vec![0.9, 0.85, 0.0, 0.2],
            vec![0.8, 0.95, 0.2, 0.0],
        ];
        let m = DissimilarityMatrix::new(ids(4), d.clone()).unwrap();
        let mut best = f64::INFINITY;
        for a in 0..4 {
            for b in a + 1..4 {
                best = best.min(total_cost(&d, &[a, b]));
            }
        }
        let run = pam_run(&m, 2, 5).unwrap();
        assert!((run.cost_history.last().unwrap() - best).abs() < 1e-12);
        let l = &run.partition.labels;
        assert_eq!(l[0], l[1]);
        assert_eq!(l[2], l[3]);
        assert_ne!(l[0], l[2]);
    }

    #[test]
    fn deterministic() {
        let mut rng = stream_rng(3, 0);
        let pts: Vec<(f64, f64)> = (0..30).map(|_| (rng.random(), rng.random())).collect();
        let m = euclid(&pts);
        assert_eq!(pam(&m, 4, 1).unwrap(), pam(&m, 4, 1).unwrap());
    }

    proptest! {
        #[test]
        fn swap_cost_never_increases(pts in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 6..25), k in 1usize..5) {
            let m = euclid(&pts);
            let run = pam_run(&m, k, 0).unwrap();
            prop_assert!(run.cost_history.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!((total_cost(&m.d, &run.medoids) - run.cost_history.last().unwrap()).abs() < 1e-9);
        }
    }
}
