//! Generated datasets with known structure, for tests and demos.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::{Subtype, NUM_CLASSES};
use crate::rng::Rng;

use super::Dataset;

fn names(prefix: &str, n: usize) -> Vec<String> {
    let w = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0w$}")).collect()
}

/// Unit-variance Gaussian blobs, one per class. Each class owns a block of
/// `markers` consecutive features (class 0 the first block, and so on) whose
/// mean is shifted by `separation` standard deviations; all other features
/// are pure noise. Rows are grouped by class.
pub fn gaussian_blobs(
    per_class: [usize; NUM_CLASSES],
    features: usize,
    markers: usize,
    separation: f64,
    rng: &mut Rng,
) -> Result<Dataset> {
    if markers == 0 || features < NUM_CLASSES * markers {
        return Err(Error::Param(format!(
            "{NUM_CLASSES} blocks of {markers} marker features need more than {features} features"
        )));
    }
    let n: usize = per_class.iter().sum();
    let mut x = Matrix::zeros(n, features);
    let mut labels = Vec::with_capacity(n);
    let mut r = 0;
    for (c, &count) in per_class.iter().enumerate() {
        for _ in 0..count {
            let row = x.row_mut(r);
            for v in row.iter_mut() {
                *v = rng.normal();
            }
            for v in &mut row[c * markers..(c + 1) * markers] {
                *v += separation;
            }
            labels.push(Subtype::ALL[c]);
            r += 1;
        }
    }
    Ok(Dataset {
        sample_ids: names("sample", n),
        genes: names("gene", features),
        x,
        labels: Some(labels),
    })
}

/// `n × features` data from a linear `rank`-factor model: standard normal
/// factors times standard normal loadings, plus Gaussian noise of standard
/// deviation `noise`.
pub fn low_rank(n: usize, features: usize, rank: usize, noise: f64, rng: &mut Rng) -> Result<Matrix> {
    let mut gen = |r, c| Matrix::from_vec(r, c, (0..r * c).map(|_| rng.normal()).collect());
    let factors = gen(n, rank)?;
    let loadings = gen(rank, features)?;
    let mut x = factors.matmul(&loadings)?;
    for v in x.as_mut_slice() {
        *v += noise * rng.normal();
    }
    Ok(x)
}
