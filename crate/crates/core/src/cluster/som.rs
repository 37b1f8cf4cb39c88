//! Self-organising map on a small hexagonal lattice, one unit per cluster.
//!
//! Units sit on an offset-row hexagonal grid: odd rows are shifted half a
//! unit to the right and rows are `sqrt(3)/2` apart, so all six immediate
//! neighbours of a unit are at lattice distance 1. Training is online with
//! a learning rate and a neighbourhood radius that both decay linearly over
//! the epochs, the radius from the map radius down to zero. The radius is a
//! hard bubble: a unit is updated only when its lattice distance to the
//! winner is strictly below the radius, so once the radius drops to 1 only
//! the winner moves. Several maps are trained and the one with the lowest
//! quantization error is kept, because a single online run can leave a unit
//! stranded between two groups of rows while a neighbour covers both.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{nearest, require_rows, Algorithm, ClusterError, FeatureMatrix, Partition};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomOptions {
    pub cols: usize,
    pub rows: usize,
    pub epochs: usize,
    pub learning_rate: (f64, f64),
    /// Final neighbourhood radius; the start is the map radius.
    pub final_radius: f64,
    /// Independent training runs; the lowest quantization error wins.
    pub restarts: usize,
}

impl Default for SomOptions {
    fn default() -> Self {
        SomOptions {
            cols: 4,
            rows: 2,
            epochs: 500,
            learning_rate: (0.05, 0.01),
            final_radius: 0.0,
            restarts: 10,
        }
    }
}

/// Lattice coordinates of every unit, row-major.
pub fn hex_positions(cols: usize, rows: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let shift = if r % 2 == 1 { 0.5 } else { 0.0 };
            out.push((c as f64 + shift, r as f64 * 3f64.sqrt() / 2.0));
        }
    }
    out
}

/// Largest distance from the lattice centroid to a unit, at least 1.
pub fn map_radius(positions: &[(f64, f64)]) -> f64 {
    let n = positions.len() as f64;
    let cx = positions.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = positions.iter().map(|p| p.1).sum::<f64>() / n;
    positions
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .fold(1.0, f64::max)
}

/// Trained codebook.
#[derive(Debug, Clone)]
pub struct SomModel {
    pub positions: Vec<(f64, f64)>,
    pub weights: Vec<Vec<f64>>,
}

impl SomModel {
    /// Mean squared distance from each row to its best-matching unit.
    pub fn quantization_error(&self, data: &[Vec<f64>]) -> f64 {
        data.iter().map(|r| nearest(r, &self.weights).1).sum::<f64>() / data.len() as f64
    }
}

/// Train `opts.restarts` maps from one random stream and keep the one with
/// the lowest quantization error (earliest on ties).
pub fn train(matrix: &FeatureMatrix, opts: &SomOptions, seed: u64) -> Result<SomModel, ClusterError> {
    let units = opts.cols * opts.rows;
    require_rows(matrix.len(), units)?;
    if opts.epochs == 0 || opts.restarts == 0 {
        return Err(ClusterError::Parameter("SOM needs at least one epoch and one restart".into()));
    }
    let mut rng = stream_rng(seed, streams::SOM);
    let mut best: Option<(f64, SomModel)> = None;
    for _ in 0..opts.restarts {
        let model = train_once(&matrix.rows, opts, &mut rng);
        let q = model.quantization_error(&matrix.rows);
        if best.as_ref().is_none_or(|b| q < b.0) {
            best = Some((q, model));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn train_once(data: &[Vec<f64>], opts: &SomOptions, rng: &mut impl Rng) -> SomModel {
    let units = opts.cols * opts.rows;
    let positions = hex_positions(opts.cols, opts.rows);
    let lattice: Vec<Vec<f64>> = positions
        .iter()
        .map(|a| positions.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
        .collect();
    let mut weights: Vec<Vec<f64>> = sample(rng, data.len(), units)
        .into_iter()
        .map(|i| data[i].clone())
        .collect();

    let r0 = map_radius(&positions);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..opts.epochs {
        let t = if opts.epochs > 1 { epoch as f64 / (opts.epochs - 1) as f64 } else { 1.0 };
        let lr = opts.learning_rate.0 + (opts.learning_rate.1 - opts.learning_rate.0) * t;
        let radius = r0 + (opts.final_radius - r0) * t;
        order.shuffle(rng);
        for &i in &order {
            let x = &data[i];
            let (bmu, _) = nearest(x, &weights);
            for (u, w) in weights.iter_mut().enumerate() {
                if u != bmu && lattice[bmu][u] >= radius {
                    continue;
                }
                for (wv, xv) in w.iter_mut().zip(x) {
                    *wv += lr * (xv - *wv);
                }
            }
        }
    }
    SomModel { positions, weights }
}

/// Train a SOM and label each household by its best-matching unit.
pub fn som(matrix: &FeatureMatrix, opts: &SomOptions, seed: u64) -> Result<Partition, ClusterError> {
    let model = train(matrix, opts, seed)?;
    let labels: Vec<usize> = matrix.rows.iter().map(|r| nearest(r, &model.weights).0).collect();
    let k = model.weights.len();
    let mut partition = Partition::from_zero_based(Algorithm::Som, k, &labels, seed);
    partition.centers = Some(model.weights);
    partition
        .parameters
        .insert("grid".into(), format!("{}x{} hexagonal", opts.cols, opts.rows));
    partition.parameters.insert("epochs".into(), opts.epochs.to_string());
    Ok(partition)
}
