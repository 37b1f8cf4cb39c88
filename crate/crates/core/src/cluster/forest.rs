//! Unsupervised random-forest dissimilarity.
//!
//! The real rows form class 1. A synthetic class 2 of equal size is built by
//! permuting every column independently, which keeps each marginal but
//! destroys the dependence between columns. A forest of Gini CART trees is
//! trained to tell the classes apart; two real rows are close when they
//! often end up in the same leaf. Proximity is counted over all trees and
//! turned into a dissimilarity `sqrt(1 - p)`.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{ClusterError, DissimilarityMatrix, FeatureMatrix};
use crate::rng::{stream_rng, streams};

pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestOptions {
    pub trees: usize,
    /// Features tried per split; `None` uses floor(sqrt(width)).
    pub mtry: Option<usize>,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions { trees: 500, mtry: None }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted classification tree.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Index of the leaf `x` lands in.
    pub fn leaf(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf => return at,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf)).count()
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Weighted child impurity `n_l * gini_l + n_r * gini_r` for two classes,
/// lower is better.
fn split_score(left_pos: usize, left_n: usize, total_pos: usize, total_n: usize) -> f64 {
    let right_pos = total_pos - left_pos;
    let right_n = total_n - left_n;
    let part = |pos: usize, n: usize| {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        let p = pos as f64 / n;
        n * 2.0 * p * (1.0 - p)
    };
    part(left_pos, left_n) + part(right_pos, right_n)
}

fn best_split(x: &[Vec<f64>], y: &[bool], idx: &[usize], features: &[usize]) -> Option<BestSplit> {
    let total_pos = idx.iter().filter(|&&i| y[i]).count();
    let n = idx.len();
    let parent = split_score(total_pos, n, total_pos, n);
    let mut best: Option<BestSplit> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_pos = 0;
        for s in 0..n - 1 {
            if y[order[s]] {
                left_pos += 1;
            }
            let (lo, hi) = (x[order[s]][f], x[order[s + 1]][f]);
            if lo == hi {
                continue;
            }
            let score = split_score(left_pos, s + 1, total_pos, n);
            if score < parent - 1e-12 && best.as_ref().is_none_or(|b| score < b.score) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some(BestSplit {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    score,
                });
            }
        }
    }
    best
}

/// Grow one tree to purity on the rows listed in `sample_idx`.
pub fn grow_tree(x: &[Vec<f64>], y: &[bool], sample_idx: Vec<usize>, mtry: usize, rng: &mut impl Rng) -> Tree {
    let width = x[0].len();
    let mut nodes = vec![Node::Leaf];
    let mut stack = vec![(0usize, sample_idx)];
    while let Some((node, idx)) = stack.pop() {
        let pos = idx.iter().filter(|&&i| y[i]).count();
        if pos == 0 || pos == idx.len() || idx.len() < 2 {
            continue;
        }
        let features: Vec<usize> = sample(rng, width, mtry.min(width)).into_vec();
        let Some(split) = best_split(x, y, &idx, &features) else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][split.feature] <= split.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf);
        nodes.push(Node::Leaf);
        nodes[node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right: left + 1,
        };
        stack.push((left + 1, r));
        stack.push((left, l));
    }
    Tree { nodes }
}

/// Real rows followed by the column-permuted synthetic rows, with labels.
pub fn synthetic_training_set(rows: &[Vec<f64>], rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<bool>) {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut synth = vec![vec![0.0; width]; n];
    for f in 0..width {
        let mut col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        col.shuffle(rng);
        for (s, v) in synth.iter_mut().zip(col) {
            s[f] = v;
        }
    }
    let mut x = rows.to_vec();
    x.extend(synth);
    let mut y = vec![true; n];
    y.extend(vec![false; n]);
    (x, y)
}

/// Proximity counts: `counts[i][j]` = trees where real rows i and j share a leaf.
pub fn proximity_counts(matrix: &FeatureMatrix, opts: &ForestOptions, seed: u64) -> Result<Vec<Vec<u32>>, ClusterError> {
    let n = matrix.len();
    if n < MIN_ROWS {
        return Err(ClusterError::TooFewRows { rows: n, needed: MIN_ROWS });
    }
    if opts.trees == 0 {
        return Err(ClusterError::Parameter("forest needs at least one tree".into()));
    }
    let width = matrix.width();
    let mtry = opts
        .mtry
        .unwrap_or_else(|| ((width as f64).sqrt().floor() as usize).max(1));
    let mut rng = stream_rng(seed, streams::FOREST);
    let (x, y) = synthetic_training_set(&matrix.rows, &mut rng);
    let total = x.len();

    let leaves: Vec<Vec<usize>> = (0..opts.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, streams::TREE_BASE + t as u64);
            let boot: Vec<usize> = (0..total).map(|_| rng.random_range(0..total)).collect();
            let tree = grow_tree(&x, &y, boot, mtry, &mut rng);
            matrix.rows.iter().map(|r| tree.leaf(r)).collect()
        })
        .collect();

    let mut counts = vec![vec![0u32; n]; n];
    for leaf in &leaves {
        for i in 0..n {
            counts[i][i] += 1;
            for j in 0..i {
                if leaf[i] == leaf[j] {
                    counts[i][j] += 1;
                    counts[j][i] += 1;
                }
            }
        }
    }
    Ok(counts)
}

pub fn rf_dissimilarity(matrix: &FeatureMatrix, trees: usize, seed: u64) -> Result<DissimilarityMatrix, ClusterError> {
    rf_dissimilarity_with(matrix, &ForestOptions { trees, mtry: None }, seed)
}

pub fn rf_dissimilarity_with(
    matrix: &FeatureMatrix,
    opts: &ForestOptions,
    seed: u64,
) -> Result<DissimilarityMatrix, ClusterError> {
    let counts = proximity_counts(matrix, opts, seed)?;
    let trees = opts.trees as f64;
    let d = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &c)| if i == j { 0.0 } else { (1.0 - c as f64 / trees).max(0.0).sqrt() })
                .collect()
        })
        .collect();
    DissimilarityMatrix::new(matrix.household_ids.clone(), d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, seed: u64) -> FeatureMatrix {
        let mut rng = stream_rng(seed, 0);
        let rows = (0..n)
            .map(|i| {
                let g = (i % 2) as f64;
                vec![g + rng.random_range(-0.1..0.1), g + rng.random_range(-0.1..0.1), rng.random::<f64>()]
            })
            .collect();
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn trees_separate_training_data() {
        let mut rng = stream_rng(1, 0);
        let x = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0], vec![3.0, 0.0]];
        let y = vec![true, false, true, false];
        let tree = grow_tree(&x, &y, (0..4).collect(), 2, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                if y[i] != y[j] {
                    assert_ne!(tree.leaf(&x[i]), tree.leaf(&x[j]));
                }
            }
        }
    }

    #[test]
    fn permutation_preserves_marginals() {
        let m = data(12, 3);
        let mut rng = stream_rng(5, 0);
        let (x, y) = synthetic_training_set(&m.rows, &mut rng);
        assert_eq!(y.iter().filter(|&&v| v).count(), 12);
        for f in 0..3 {
            let mut a: Vec<f64> = x[..12].iter().map(|r| r[f]).collect();
            let mut b: Vec<f64> = x[12..].iter().map(|r| r[f]).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dissimilarity_properties() {
        let m = data(20, 7);
        let d = rf_dissimilarity(&m, 100, 11).unwrap();
        for i in 0..20 {
            assert_eq!(d.d[i][i], 0.0);
            for j in 0..20 {
                assert_eq!(d.d[i][j], d.d[j][i]);
                assert!((0.0..=1.0).contains(&d.d[i][j]));
            }
        }
        assert_eq!(d, rf_dissimilarity(&m, 100, 11).unwrap());
    }

    #[test]
    fn duplicated_rows_are_close() {
        let mut m = data(20, 2);
        m.rows[1] = m.rows[0].clone();
        let d = rf_dissimilarity(&m, 500, 4).unwrap();
        assert!(d.d[0][1] < 0.2, "{}", d.d[0][1]);
    }

    #[test]
    fn needs_ten_rows() {
        assert!(matches!(
            rf_dissimilarity(&data(9, 0), 10, 0),
            Err(ClusterError::TooFewRows { rows: 9, needed: 10 })
        ));
    }
}
