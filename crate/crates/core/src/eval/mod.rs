//! Metrics, cross-validation, and report files.

pub mod cv;
pub mod metrics;
pub mod report;

pub use cv::{fold_seed, run_cv, run_cv_audited, CvOptions, CvOutcome, CvSummary, FoldSummary};
pub use metrics::{boxplot_stats, confusion, quantile_sorted, ConfusionMatrix, FiveNumber};
pub use report::{read_summary, render_boxplot_svg, write_cv_outputs, write_summary_views};
