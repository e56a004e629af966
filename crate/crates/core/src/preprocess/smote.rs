//! SMOTE: synthetic minority samples interpolated towards same-class
//! nearest neighbours.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

pub const DEFAULT_K: usize = 5;

/// How one synthetic row was made: `base + lambda * (neighbor - base)`,
/// with row indices into the class matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

/// Synthetic counts needed to lift every present class to the majority count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmotePlan {
    pub k_neighbors: usize,
    pub synthetic: Vec<usize>,
    pub seed: u64,
}

impl SmotePlan {
    pub fn for_counts(counts: &[usize], k_neighbors: usize, seed: u64) -> SmotePlan {
        let target = counts.iter().copied().max().unwrap_or(0);
        let synthetic = counts
            .iter()
            .map(|&c| if c == 0 { 0 } else { target - c })
            .collect();
        SmotePlan {
            k_neighbors,
            synthetic,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.synthetic.iter().sum()
    }
}

#[derive(PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other rows of each row by Euclidean distance, closest
/// first; equal distances are ordered by row index.
pub fn nearest_neighbors(x: &Matrix, k: usize) -> Vec<Vec<usize>> {
    (0..x.rows())
        .map(|i| {
            let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
            for j in (0..x.rows()).filter(|&j| j != i) {
                let c = Candidate {
                    dist: squared_distance(x.row(i), x.row(j)),
                    index: j,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if heap.peek().is_some_and(|worst| c < *worst) {
                    heap.pop();
                    heap.push(c);
                }
            }
            heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
        })
        .collect()
}

pub fn smote(x_minority: &Matrix, n_synthetic: usize, k: usize, rng: &mut Rng) -> Result<Matrix> {
    smote_traced(x_minority, n_synthetic, k, rng).map(|(m, _)| m)
}

/// Like [`smote`], also returning how each synthetic row was formed. Base
/// rows are taken round-robin in index order; `k` is clamped to `n - 1`.
pub fn smote_traced(
    x_minority: &Matrix,
    n_synthetic: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<(Matrix, Vec<SyntheticOrigin>)> {
    let n = x_minority.rows();
    if n < 2 {
        return Err(Error::Resample(format!(
            "SMOTE needs at least 2 samples in a class, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::Param("SMOTE needs k >= 1".into()));
    }
    let k = k.min(n - 1);
    let neighbors = nearest_neighbors(x_minority, k);
    let mut out = Matrix::zeros(n_synthetic, x_minority.cols());
    let mut origins = Vec::with_capacity(n_synthetic);
    for s in 0..n_synthetic {
        let base = s % n;
        let neighbor = neighbors[base][rng.index(k)];
        let lambda = rng.unit();
        let (xb, xn) = (x_minority.row(base), x_minority.row(neighbor));
        for (o, (b, nb)) in out.row_mut(s).iter_mut().zip(xb.iter().zip(xn)) {
            *o = b + lambda * (nb - b);
        }
        origins.push(SyntheticOrigin {
            base,
            neighbor,
            lambda,
        });
    }
    Ok((out, origins))
}

/// Oversamples every class to the majority count. Original rows come first,
/// unchanged and in order; synthetic rows follow grouped by class index.
pub fn balance_classes(
    x: &Matrix,
    labels: &[usize],
    k: usize,
    rng: &mut Rng,
) -> Result<(Matrix, Vec<usize>)> {
    if labels.len() != x.rows() {
        return Err(Error::Shape {
            op: "balance_classes",
            left: x.shape(),
            right: (labels.len(), x.cols()),
        });
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let present = members.iter().filter(|m| !m.is_empty()).count();
    if present < 2 {
        return Err(Error::Resample(format!(
            "class balancing needs at least 2 classes, found {present}"
        )));
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let plan = SmotePlan::for_counts(&counts, k, rng.seed());
    let mut out = x.clone();
    let mut out_labels = labels.to_vec();
    for (c, idx) in members.iter().enumerate() {
        let need = plan.synthetic[c];
        if need == 0 {
            continue;
        }
        let synth = smote(&x.select_rows(idx), need, k, rng)?;
        out = out.vstack(&synth)?;
        out_labels.extend(std::iter::repeat(c).take(need));
    }
    Ok((out, out_labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        let mut rng = Rng::new(0);
        let (_, origins) = smote_traced(&x, 1, 1, &mut rng).unwrap();
        let o = origins[0];
        assert_eq!((o.base, o.neighbor), (0, 1));
        // Re-derive the row at lambda = 0.5 by the same formula.
        let p: Vec<f64> = x
            .row(0)
            .iter()
            .zip(x.row(1))
            .map(|(b, n)| b + 0.5 * (n - b))
            .collect();
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn too_small_class() {
        let mut rng = Rng::new(0);
        assert!(matches!(
            smote(&Matrix::zeros(1, 3), 4, 5, &mut rng),
            Err(Error::Resample(_))
        ));
    }

    #[test]
    fn k_is_clamped() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [5.0]]).unwrap();
        let mut rng = Rng::new(3);
        let (m, origins) = smote_traced(&x, 9, 10, &mut rng).unwrap();
        assert_eq!(m.rows(), 9);
        assert!(origins.iter().all(|o| o.neighbor != o.base && o.neighbor < 3));
        let bases: Vec<usize> = origins.iter().map(|o| o.base).collect();
        assert_eq!(bases, [0, 1, 2, 0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn plan_for_cohort_counts() {
        let plan = SmotePlan::for_counts(&[147, 67, 434, 194], DEFAULT_K, 1);
        assert_eq!(plan.synthetic, vec![287, 367, 0, 240]);
        assert_eq!(plan.total(), 894);
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let labels = [0, 1, 0, 1];
        let mut rng = Rng::new(1);
        let (bx, bl) = balance_classes(&x, &labels, 5, &mut rng).unwrap();
        assert_eq!(bx, x);
        assert_eq!(bl, labels);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::zeros(3, 2);
        let mut rng = Rng::new(1);
        assert!(balance_classes(&x, &[0, 0, 0], 5, &mut rng).is_err());
    }
}
