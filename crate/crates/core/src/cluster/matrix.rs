use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ClusterError;

/// Per-household feature rows of uniform width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub household_ids: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// True once every column has been rescaled to [0, 1].
    pub normalized: bool,
}

impl FeatureMatrix {
    pub fn new(household_ids: Vec<String>, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, ClusterError> {
        if household_ids.len() != rows.len() {
            return Err(ClusterError::Shape(format!(
                "{} ids for {} rows",
                household_ids.len(),
                rows.len()
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(ClusterError::Shape(format!(
                "row of width {} in a matrix of width {}",
                bad.len(),
                columns.len()
            )));
        }
        Ok(FeatureMatrix {
            household_ids,
            columns,
            rows,
            normalized: false,
        })
    }

    /// Unnamed columns `x0..`, for tests and ad hoc data.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ClusterError> {
        let width = rows.first().map_or(0, Vec::len);
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let cols = (0..width).map(|i| format!("x{i}")).collect();
        Self::new(ids, cols, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Restrict to the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FeatureMatrix, ClusterError> {
        let idx = names
            .iter()
            .map(|n| {
                self.columns
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| ClusterError::Shape(format!("no column `{n}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureMatrix {
            household_ids: self.household_ids.clone(),
            columns: names.iter().map(|s| s.to_string()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
            normalized: self.normalized,
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "household_id,{}", self.columns.join(","))?;
        for (id, row) in self.household_ids.iter().zip(&self.rows) {
            write!(out, "{id}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(source: R) -> Result<FeatureMatrix, ClusterError> {
        let mut lines = source.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| ClusterError::Parse(e.to_string()))?
            .ok_or_else(|| ClusterError::Parse("empty feature file".into()))?;
        let columns: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| ClusterError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            ids.push(fields.next().unwrap_or_default().to_string());
            let row = fields
                .map(|f| f.parse::<f64>().map_err(|e| ClusterError::Parse(format!("line {}: {e}", i + 2))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        FeatureMatrix::new(ids, columns, rows)
    }
}

/// Rescale every column to [0, 1]; constant columns become 0.
pub fn minmax_normalize(matrix: &FeatureMatrix) -> FeatureMatrix {
    let width = matrix.width();
    let mut lo = vec![f64::INFINITY; width];
    let mut hi = vec![f64::NEG_INFINITY; width];
    for row in &matrix.rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let rows = matrix
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        ((v - lo[j]) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    FeatureMatrix {
        household_ids: matrix.household_ids.clone(),
        columns: matrix.columns.clone(),
        rows,
        normalized: true,
    }
}
