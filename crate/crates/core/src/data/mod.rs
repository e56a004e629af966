//! Sample × gene datasets, their ingestion, and train/validation/test
//! partitioning.

pub mod io;
pub mod split;
pub mod synthetic;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::{Subtype, NUM_CLASSES};

pub use io::{load_expression, load_labels, write_expression, write_labels};
pub use split::{batches, carve_validation, make_folds, make_split, FoldPlan, SplitPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample_ids: Vec<String>,
    pub genes: Vec<String>,
    /// `samples × genes`
    pub x: Matrix,
    pub labels: Option<Vec<Subtype>>,
}

/// Per-class sample counts in [`Subtype`] index order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts(pub [usize; NUM_CLASSES]);

impl ClassCounts {
    pub fn of(labels: &[Subtype]) -> Self {
        let mut c = [0; NUM_CLASSES];
        for l in labels {
            c[l.index()] += 1;
        }
        ClassCounts(c)
    }

    pub fn get(&self, s: Subtype) -> usize {
        self.0[s.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinReport {
    pub expression_samples: usize,
    pub labeled_samples: usize,
    pub kept: usize,
    pub counts: ClassCounts,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn labels(&self) -> Result<&[Subtype]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Data("dataset is unlabeled".into()))
    }

    pub fn class_counts(&self) -> Option<ClassCounts> {
        self.labels.as_deref().map(ClassCounts::of)
    }

    /// Rows `idx`, in that order, as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            genes: self.genes.clone(),
            x: self.x.select_rows(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Keeps the samples that have a label, in expression-file order.
pub fn join_and_filter(ds: &Dataset, labels: &HashMap<String, Subtype>) -> (Dataset, JoinReport) {
    let keep: Vec<usize> = ds
        .sample_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| labels.contains_key(*id))
        .map(|(i, _)| i)
        .collect();
    let mut out = ds.subset(&keep);
    let l: Vec<Subtype> = out.sample_ids.iter().map(|id| labels[id]).collect();
    let counts = ClassCounts::of(&l);
    out.labels = Some(l);
    if keep.is_empty() {
        log::warn!(
            "no sample ids are shared between the expression matrix ({} samples) and the labels ({} entries)",
            ds.len(),
            labels.len()
        );
    }
    let report = JoinReport {
        expression_samples: ds.len(),
        labeled_samples: labels.len(),
        kept: keep.len(),
        counts,
    };
    (out, report)
}
