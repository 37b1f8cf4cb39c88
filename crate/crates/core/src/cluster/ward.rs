//! Agglomerative clustering with Ward linkage.
//!
//! Works on squared Euclidean dissimilarities updated with the Lance-Williams
//! recurrence; reported merge heights are their square roots (the `ward.D2`
//! convention). The closest pair is found by a full scan, lowest `(i, j)`
//! winning ties, which is O(n^3) overall and fine for a few hundred rows.

use super::{label_means, require_rows, sq_dist, Algorithm, ClusterError, FeatureMatrix, Partition};

/// One agglomeration step: clusters `a < b` (indexed by their first row)
/// joined at `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Full merge sequence for `rows` (n - 1 merges).
pub fn ward_linkage(rows: &[Vec<f64>]) -> Vec<Merge> {
    let n = rows.len();
    let mut d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sq_dist(&rows[i], &rows[j])).collect())
        .collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d[i][j] < best.2 {
                    best = (i, j, d[i][j]);
                }
            }
        }
        let (i, j, dij) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let updated = ((ni + nk) * d[i][k] + (nj + nk) * d[j][k] - nk * dij) / (ni + nj + nk);
            d[i][k] = updated;
            d[k][i] = updated;
        }
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge {
            a: i,
            b: j,
            height: dij.max(0.0).sqrt(),
            size: size[i],
        });
    }
    merges
}

/// Apply the first `n - k` merges; labels are numbered by each cluster's
/// first row (0-based).
pub fn cut_tree(merges: &[Merge], n: usize, k: usize) -> Vec<usize> {
    let mut owner: Vec<usize> = (0..n).collect();
    for m in merges.iter().take(n.saturating_sub(k)) {
        for o in owner.iter_mut() {
            if *o == m.b {
                *o = m.a;
            }
        }
    }
    let mut reps: Vec<usize> = owner.clone();
    reps.sort_unstable();
    reps.dedup();
    owner.iter().map(|o| reps.binary_search(o).unwrap()).collect()
}

pub fn hierarchical_ward(matrix: &FeatureMatrix, k: usize) -> Result<Partition, ClusterError> {
    require_rows(matrix.len(), k)?;
    let merges = ward_linkage(&matrix.rows);
    let labels = cut_tree(&merges, matrix.len(), k);
    let mut partition = Partition::from_zero_based(Algorithm::Hier, k, &labels, 0);
    partition.centers = Some(label_means(&matrix.rows, &labels, k));
    partition.parameters.insert("linkage".into(), "ward".into());
    Ok(partition)
}
