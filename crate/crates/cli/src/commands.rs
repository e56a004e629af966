use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use subtyper_core::data::{
    join_and_filter, load_expression, load_labels, make_folds, make_split, write_expression, write_labels, ClassCounts,
    Dataset,
};
use subtyper_core::eval::{read_summary, run_cv, write_cv_outputs, write_summary_views, ConfusionMatrix, CvOptions, CvSummary};
use subtyper_core::pipeline::{run_pipeline, Checkpoint, PipelineConfig};
use subtyper_core::preprocess::{Subtype, NUM_CLASSES};

use crate::config::{Manifest, RunConfig};
use crate::error::{CliError, CliResult};

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn input_file(path: Option<&PathBuf>, key: &str) -> CliResult<PathBuf> {
    let p = path.ok_or_else(|| CliError::Usage(format!("no {key} file given (set `{key}` or pass --{key})")))?;
    if !p.is_file() {
        return Err(CliError::Usage(format!("{key} file {} does not exist", p.display())));
    }
    Ok(p.clone())
}

/// Output directory with its path fixed into the config, so the manifest
/// records where things went.
fn prepare_out(cfg: &RunConfig) -> CliResult<(RunConfig, PathBuf)> {
    let mut cfg = cfg.clone();
    let out = cfg.resolved_out_dir();
    cfg.out_dir = Some(out.clone());
    ensure_dir(&out)?;
    Ok((cfg, out))
}

fn counts_table(counts: &ClassCounts) -> String {
    let mut s = String::from("subtype\tcount\n");
    for c in Subtype::ALL {
        s.push_str(&format!("{c}\t{}\n", counts.get(c)));
    }
    s
}

fn load_labeled(cfg: &RunConfig) -> CliResult<Dataset> {
    let expr = input_file(cfg.expression.as_ref(), "expression")?;
    let labels = input_file(cfg.labels.as_ref(), "labels")?;
    let ds = load_expression(&expr, cfg.transpose)?;
    let map = load_labels(&labels)?;
    let (joined, report) = join_and_filter(&ds, &map);
    log::info!(
        "{} expression samples, {} labeled, {} kept",
        report.expression_samples,
        report.labeled_samples,
        report.kept
    );
    if joined.is_empty() {
        return Err(CliError::Usage(format!(
            "no sample in {} has a label in {}",
            expr.display(),
            labels.display()
        )));
    }
    Ok(joined)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepReport {
    pub expression_samples: usize,
    pub labeled_samples: usize,
    pub kept: usize,
    pub counts: ClassCounts,
}

/// Joins expression and labels, writing the labeled subset and its class
/// counts.
pub fn cmd_prep(cfg: &RunConfig) -> CliResult<PrepReport> {
    let expr = input_file(cfg.expression.as_ref(), "expression")?;
    let labels = input_file(cfg.labels.as_ref(), "labels")?;
    let (cfg, out) = prepare_out(cfg)?;
    let ds = load_expression(&expr, cfg.transpose)?;
    let (joined, report) = join_and_filter(&ds, &load_labels(&labels)?);
    write_expression(&out.join("expression.tsv"), &joined)?;
    write_labels(&out.join("labels.tsv"), &joined)?;
    write_file(&out.join("class_counts.tsv"), counts_table(&report.counts).as_bytes())?;
    Manifest::new("prep", &cfg).write(&out)?;
    Ok(PrepReport {
        expression_samples: report.expression_samples,
        labeled_samples: report.labeled_samples,
        kept: report.kept,
        counts: report.counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestPrediction {
    pub sample_id: String,
    pub truth: Subtype,
    pub predicted: Subtype,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub accuracy: f64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub per_class_recall: [Option<f64>; NUM_CLASSES],
    pub predictions: Vec<TestPrediction>,
}

fn pipeline_config(cfg: &RunConfig, input: usize) -> CliResult<PipelineConfig> {
    Ok(PipelineConfig::new(
        &cfg.architecture,
        cfg.training.clone(),
        input,
        cfg.seed,
    )?)
}

/// One stratified train/validation/test run: writes the model, the loss
/// trace, and a test report.
pub fn cmd_train(cfg: &RunConfig) -> CliResult<TrainReport> {
    let ds = load_labeled(cfg)?;
    let (cfg, out) = prepare_out(cfg)?;
    let split = make_split(ds.labels()?, cfg.test_frac, cfg.val_frac, cfg.seed)?;
    let pcfg = pipeline_config(&cfg, ds.x.cols())?;
    let run = run_pipeline(&ds, &split, &pcfg, None)?;

    let ckpt = cfg.checkpoint_path();
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    run.checkpoint.save(&ckpt)?;
    write_file(&out.join("trace.csv"), run.trace.to_csv().as_bytes())?;
    write_file(&out.join("confusion.csv"), run.test.confusion.to_csv().as_bytes())?;

    let report = TrainReport {
        accuracy: run.test.accuracy()?,
        train_size: split.train.len(),
        val_size: split.val.len(),
        test_size: split.test.len(),
        confusion: run.test.confusion,
        per_class_recall: run.test.confusion.per_class_recall(),
        predictions: run
            .test
            .indices
            .iter()
            .zip(run.test.truth.iter().zip(&run.test.predicted))
            .map(|(&i, (&truth, &predicted))| TestPrediction {
                sample_id: ds.sample_ids[i].clone(),
                truth,
                predicted,
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("test_report.json"), &json)?;
    Manifest::new("train", &cfg).write(&out)?;
    Ok(report)
}

/// k-fold cross-validation, writing the summary bundle.
pub fn cmd_cv(cfg: &RunConfig) -> CliResult<CvSummary> {
    if cfg.folds < 2 {
        return Err(CliError::Usage(format!(
            "folds = {} but cross-validation needs at least 2",
            cfg.folds
        )));
    }
    let ds = load_labeled(cfg)?;
    let (cfg, out) = prepare_out(cfg)?;
    let folds = make_folds(ds.labels()?, cfg.folds, cfg.seed)?;
    let pcfg = pipeline_config(&cfg, ds.x.cols())?;
    let opts = CvOptions {
        val_frac: cfg.val_frac,
        jobs: cfg.jobs,
    };
    let outcome = run_cv(&ds, &folds, &pcfg, &opts)?;
    write_cv_outputs(&out, &outcome)?;
    Manifest::new("cv", &cfg).write(&out)?;
    Ok(outcome.summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub samples: usize,
    pub output: PathBuf,
    /// Accuracy over samples that also appear in a supplied label file.
    pub accuracy: Option<f64>,
}

/// Labels every sample of an expression file with class probabilities.
pub fn cmd_predict(cfg: &RunConfig) -> CliResult<PredictReport> {
    let ckpt_path = cfg
        .checkpoint
        .clone()
        .ok_or_else(|| CliError::Usage("no checkpoint given (pass --checkpoint)".into()))?;
    if !ckpt_path.is_file() {
        return Err(CliError::Usage(format!("checkpoint {} does not exist", ckpt_path.display())));
    }
    let expr = input_file(cfg.expression.as_ref(), "expression")?;
    let model = Checkpoint::load(&ckpt_path)?.model;
    let ds = load_expression(&expr, cfg.transpose)?;
    if ds.x.cols() != model.input_width() {
        return Err(CliError::Usage(format!(
            "{} has {} features but the checkpoint expects {}",
            expr.display(),
            ds.x.cols(),
            model.input_width()
        )));
    }
    if let Some(i) = ds.genes.iter().zip(&model.genes).position(|(a, b)| a != b) {
        return Err(CliError::Usage(format!(
            "gene {} of {} is `{}` but the checkpoint has `{}`",
            i + 1,
            expr.display(),
            ds.genes[i],
            model.genes[i]
        )));
    }
    let (cfg, out) = prepare_out(cfg)?;
    let (predicted, proba) = model.predict(&ds.x)?;

    let mut csv = String::from("sample_id,predicted,basal_p,her2_p,luma_p,lumb_p\n");
    for (i, id) in ds.sample_ids.iter().enumerate() {
        csv.push_str(id);
        csv.push(',');
        csv.push_str(predicted[i].name());
        for p in proba.row(i) {
            csv.push_str(&format!(",{p}"));
        }
        csv.push('\n');
    }
    let output = out.join("predictions.csv");
    write_file(&output, csv.as_bytes())?;

    let accuracy = match cfg.labels.as_ref() {
        Some(p) => {
            let truth = load_labels(&input_file(Some(p), "labels")?)?;
            let pairs: Vec<bool> = ds
                .sample_ids
                .iter()
                .zip(&predicted)
                .filter_map(|(id, pred)| truth.get(id).map(|t| t == pred))
                .collect();
            (!pairs.is_empty()).then(|| pairs.iter().filter(|&&ok| ok).count() as f64 / pairs.len() as f64)
        }
        None => None,
    };
    Manifest::new("predict", &cfg).write(&out)?;
    Ok(PredictReport {
        samples: ds.len(),
        output,
        accuracy,
    })
}

/// Re-renders `confusion.csv` and `boxplot.svg` from a saved
/// `cv_summary.json`.
pub fn cmd_report(summary: &Path, cfg: &RunConfig) -> CliResult<CvSummary> {
    if !summary.is_file() {
        return Err(CliError::Usage(format!("summary {} does not exist", summary.display())));
    }
    let s = read_summary(summary).map_err(|e| CliError::Usage(e.to_string()))?;
    let (cfg, out) = prepare_out(cfg)?;
    write_summary_views(&out, &s)?;
    Manifest::new("report", &cfg).write(&out)?;
    Ok(s)
}

/// Human-readable CV result table.
pub fn format_summary(s: &CvSummary) -> String {
    let mut o = String::new();
    for f in &s.folds {
        o.push_str(&format!("fold {:>2}  n={:<4} accuracy {:.4}  seed {}\n", f.fold, f.test_size, f.accuracy, f.seed));
    }
    let d = &s.accuracy_distribution;
    o.push_str(&format!(
        "mean accuracy {:.4}  (min {:.4}  q1 {:.4}  median {:.4}  q3 {:.4}  max {:.4})\n",
        s.mean_accuracy, d.min, d.q1, d.median, d.q3, d.max
    ));
    for (c, r) in Subtype::ALL.iter().zip(s.per_class_recall) {
        match r {
            Some(r) => o.push_str(&format!("recall {c:<5} {r:.4}\n")),
            None => o.push_str(&format!("recall {c:<5} n/a\n")),
        }
    }
    o
}
