//! Fuzzy c-means with hard assignment by maximum membership.

use rand::Rng;

use super::{require_rows, sq_dist, Algorithm, ClusterError, FeatureMatrix, Partition};
use crate::rng::{stream_rng, streams};

pub const MAX_ITERATIONS: usize = 300;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FuzzyRun {
    pub partition: Partition,
    /// Largest |row sum - 1| of the membership matrix after each iteration.
    pub row_sum_error: Vec<f64>,
    pub iterations: usize,
}

pub fn fuzzy_cmeans(matrix: &FeatureMatrix, k: usize, fuzzifier: f64, seed: u64) -> Result<Partition, ClusterError> {
    fuzzy_cmeans_run(matrix, k, fuzzifier, seed).map(|r| r.partition)
}

/// Membership row of one point given the current centers.
///
/// Weights are `d_ik^(-2/(m-1))` normalised to sum to one, which is the
/// usual `1 / sum_j (d_ik/d_jk)^(2/(m-1))`. A point lying on a center takes
/// full membership there (first such center on ties).
pub fn memberships_for(point: &[f64], centers: &[Vec<f64>], fuzzifier: f64) -> Vec<f64> {
    let d2: Vec<f64> = centers.iter().map(|c| sq_dist(point, c)).collect();
    let mut u = vec![0.0; centers.len()];
    if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
        u[hit] = 1.0;
        return u;
    }
    // (d^2)^(-1/(m-1)) == d^(-2/(m-1)); scale by the minimum to stay in range
    let exponent = -1.0 / (fuzzifier - 1.0);
    let dmin = d2.iter().cloned().fold(f64::INFINITY, f64::min);
    for (w, &d) in u.iter_mut().zip(&d2) {
        *w = (d / dmin).powf(exponent);
    }
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|w| *w /= total);
    u
}

fn weighted_centers(rows: &[Vec<f64>], u: &[Vec<f64>], k: usize, fuzzifier: f64, previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let width = rows[0].len();
    let mut centers = vec![vec![0.0; width]; k];
    let mut weights = vec![0.0; k];
    for (row, mu) in rows.iter().zip(u) {
        for c in 0..k {
            let w = mu[c].powf(fuzzifier);
            weights[c] += w;
            for (s, v) in centers[c].iter_mut().zip(row) {
                *s += w * v;
            }
        }
    }
    for c in 0..k {
        if weights[c] > 0.0 {
            centers[c].iter_mut().for_each(|v| *v /= weights[c]);
        } else if let Some(p) = previous.get(c) {
            centers[c] = p.clone();
        }
    }
    centers
}

fn row_sum_error(u: &[Vec<f64>]) -> f64 {
    u.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

pub fn fuzzy_cmeans_run(matrix: &FeatureMatrix, k: usize, fuzzifier: f64, seed: u64) -> Result<FuzzyRun, ClusterError> {
    require_rows(matrix.len(), k)?;
    if fuzzifier.is_nan() || fuzzifier <= 1.0 || !fuzzifier.is_finite() {
        return Err(ClusterError::Parameter(format!("fuzzifier must exceed 1, got {fuzzifier}")));
    }
    let rows = &matrix.rows;
    let mut rng = stream_rng(seed, streams::FUZZY);
    let mut u: Vec<Vec<f64>> = rows
        .iter()
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut errors = vec![row_sum_error(&u)];
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        centers = weighted_centers(rows, &u, k, fuzzifier, &centers);
        let next: Vec<Vec<f64>> = rows.iter().map(|r| memberships_for(r, &centers, fuzzifier)).collect();
        let change = u
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        u = next;
        errors.push(row_sum_error(&u));
        if change < TOLERANCE {
            break;
        }
    }

    let labels: Vec<usize> = u
        .iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    let mut partition = Partition::from_zero_based(Algorithm::Fuzzy, k, &labels, seed);
    partition.centers = Some(centers);
    partition.memberships = Some(u);
    partition.parameters.insert("fuzzifier".into(), fuzzifier.to_string());
    partition.parameters.insert("iterations".into(), iterations.to_string());
    Ok(FuzzyRun {
        partition,
        row_sum_error: errors,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equidistant_point_splits_evenly() {
        let u = memberships_for(&[0.0, 0.0], &[vec![1.0, 0.0], vec![-1.0, 0.0]], 2.0);
        assert_eq!(u, vec![0.5, 0.5]);
    }

    #[test]
    fn point_on_a_center_takes_full_membership() {
        let u = memberships_for(&[1.0, 0.0], &[vec![3.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]], 2.0);
        assert_eq!(u, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn membership_matches_the_ratio_form() {
        let centers = vec![vec![0.0], vec![2.0], vec![7.0]];
        let x = [1.5];
        let m = 2.5;
        let u = memberships_for(&x, &centers, m);
        let d: Vec<f64> = centers.iter().map(|c| (x[0] - c[0]).abs()).collect();
        for i in 0..3 {
            let direct = 1.0 / (0..3).map(|j| (d[i] / d[j]).powf(2.0 / (m - 1.0))).sum::<f64>();
            assert!((u[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_stay_stochastic() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, (i * i % 11) as f64 / 3.0]).collect();
        let m = FeatureMatrix::from_rows(rows).unwrap();
        let run = fuzzy_cmeans_run(&m, 4, 2.0, 9).unwrap();
        assert!(run.row_sum_error.iter().all(|&e| e <= 1e-9));
        for row in run.partition.memberships.as_ref().unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        assert_eq!(run.partition, fuzzy_cmeans(&m, 4, 2.0, 9).unwrap());
    }

    #[test]
    fn bad_fuzzifier() {
        let m = FeatureMatrix::from_rows(vec![vec![0.0]; 4]).unwrap();
        assert!(fuzzy_cmeans(&m, 2, 1.0, 0).is_err());
        assert!(fuzzy_cmeans(&m, 5, 2.0, 0).is_err());
    }

    #[test]
    fn separated_groups() {
        let mut rows = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1]];
        rows.extend([vec![5.0, 5.0], vec![5.1, 5.0], vec![5.0, 5.1]]);
        let p = fuzzy_cmeans(&FeatureMatrix::from_rows(rows).unwrap(), 2, 2.0, 1).unwrap();
        assert!(p.labels[..3].iter().all(|&l| l == p.labels[0]));
        assert!(p.labels[3..].iter().all(|&l| l != p.labels[0]));
    }
}
