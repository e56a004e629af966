use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-feature z-score transform. Constant features map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant_mask: Vec<bool>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Result<Scaler> {
        if x.rows() < 2 {
            return Err(Error::Param(format!(
                "scaler needs at least 2 samples, got {}",
                x.rows()
            )));
        }
        let stats = x.column_stats();
        Ok(Self::from_stats(stats.means, stats.stds))
    }

    pub fn from_stats(means: Vec<f64>, stds: Vec<f64>) -> Scaler {
        let constant_mask = stds.iter().map(|&s| s == 0.0).collect();
        Scaler {
            means,
            stds,
            constant_mask,
        }
    }

    pub fn features(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.features() {
            return Err(Error::Shape {
                op: "scaler_apply",
                left: x.shape(),
                right: (x.rows(), self.features()),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for j in 0..row.len() {
                row[j] = if self.constant_mask[j] {
                    0.0
                } else {
                    (row[j] - self.means[j]) / self.stds[j]
                };
            }
        }
        Ok(out)
    }
}
