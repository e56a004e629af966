use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{carve_validation, Dataset, FoldPlan, SplitPlan};
use crate::error::{Error, Result};
use crate::pipeline::{run_pipeline, AccessLog, PipelineConfig, TrainTrace};
use crate::preprocess::NUM_CLASSES;
use crate::rng::derive_seed;

use super::metrics::{boxplot_stats, ConfusionMatrix, FiveNumber};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    /// Share of each fold's training rows held back for early stopping.
    pub val_frac: f64,
    /// Worker threads; folds run concurrently when above one.
    pub jobs: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { val_frac: 0.1, jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_recall: [Option<f64>; NUM_CLASSES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub seed: u64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub accuracy_distribution: FiveNumber,
    pub fold_seeds: Vec<u64>,
    pub fold_sizes: Vec<usize>,
    /// Sum of the per-fold confusion matrices.
    pub confusion: ConfusionMatrix,
    pub per_class_recall: [Option<f64>; NUM_CLASSES],
    pub folds: Vec<FoldSummary>,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub summary: CvSummary,
    pub traces: Vec<TrainTrace>,
}

/// Seed of fold `fold` under master seed `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, 0x1000 + fold as u64)
}

fn run_fold(
    ds: &Dataset,
    folds: &FoldPlan,
    fold: usize,
    cfg: &PipelineConfig,
    opts: &CvOptions,
    audit: Option<&AccessLog>,
) -> Result<(FoldSummary, TrainTrace)> {
    let labels = ds.labels()?;
    let seed = fold_seed(cfg.seed, fold);
    let (train, val) = carve_validation(labels, &folds.rest_indices(fold), opts.val_frac, derive_seed(seed, 0))?;
    let split = SplitPlan {
        train,
        val,
        test: folds.test_indices(fold),
        seed,
    };
    let run = run_pipeline(ds, &split, &cfg.with_seed(seed), audit)?;
    let summary = FoldSummary {
        fold,
        seed,
        train_size: split.train.len(),
        val_size: split.val.len(),
        test_size: split.test.len(),
        accuracy: run.test.accuracy()?,
        confusion: run.test.confusion,
        per_class_recall: run.test.confusion.per_class_recall(),
    };
    log::info!("fold {fold}: accuracy {:.4}", summary.accuracy);
    Ok((summary, run.trace))
}

/// k-fold cross-validation. Each fold trains a fresh pipeline on the other
/// folds (less a stratified validation slice) and scores its own rows.
/// Results are identical for any `jobs`.
pub fn run_cv(ds: &Dataset, folds: &FoldPlan, cfg: &PipelineConfig, opts: &CvOptions) -> Result<CvOutcome> {
    run_cv_audited(ds, folds, cfg, opts, None)
}

/// [`run_cv`] recording row access of every fold into `audit`.
pub fn run_cv_audited(
    ds: &Dataset,
    folds: &FoldPlan,
    cfg: &PipelineConfig,
    opts: &CvOptions,
    audit: Option<&AccessLog>,
) -> Result<CvOutcome> {
    if folds.assignments.len() != ds.len() {
        return Err(Error::Split(format!(
            "fold plan covers {} samples, dataset has {}",
            folds.assignments.len(),
            ds.len()
        )));
    }
    if opts.jobs == 0 {
        return Err(Error::Param("jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Param(format!("thread pool: {e}")))?;
    let one = |f: usize| run_fold(ds, folds, f, cfg, opts, audit).map_err(|e| Error::Fold { fold: f, source: Box::new(e) });
    let results: Vec<Result<(FoldSummary, TrainTrace)>> = pool.install(|| {
        if opts.jobs == 1 {
            (0..folds.k).map(one).collect()
        } else {
            (0..folds.k).into_par_iter().map(one).collect()
        }
    });
    let mut fold_summaries = Vec::with_capacity(folds.k);
    let mut traces = Vec::with_capacity(folds.k);
    for r in results {
        let (s, t) = r?;
        fold_summaries.push(s);
        traces.push(t);
    }

    let fold_accuracies: Vec<f64> = fold_summaries.iter().map(|f| f.accuracy).collect();
    let mut total = ConfusionMatrix::default();
    for f in &fold_summaries {
        total.merge(&f.confusion);
    }
    let summary = CvSummary {
        k: folds.k,
        seed: cfg.seed,
        mean_accuracy: fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64,
        accuracy_distribution: boxplot_stats(&fold_accuracies)?,
        fold_accuracies,
        fold_seeds: fold_summaries.iter().map(|f| f.seed).collect(),
        fold_sizes: folds.fold_sizes(),
        confusion: total,
        per_class_recall: total.per_class_recall(),
        folds: fold_summaries,
    };
    Ok(CvOutcome { summary, traces })
}
