mod common;

use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
use subtyper_core::data::make_folds;
use subtyper_core::eval::{
    boxplot_stats, read_summary, run_cv, write_cv_outputs, write_summary_views, CvOptions,
};
use subtyper_core::pipeline::PipelineConfig;
use subtyper_core::{Error, Rng};

fn quick_config(seed: u64) -> PipelineConfig {
    let mut cfg = common::desk_config(50, seed);
    cfg.training.max_epochs = 15;
    cfg
}

#[test]
fn summary_is_consistent_and_thread_independent() {
    let ds = common::blobs(5);
    let folds = make_folds(ds.labels().unwrap(), 5, 2).unwrap();
    let cfg = quick_config(8);
    let one = run_cv(&ds, &folds, &cfg, &CvOptions::default()).unwrap();
    let many = run_cv(&ds, &folds, &cfg, &CvOptions { jobs: 3, ..Default::default() }).unwrap();
    assert_eq!(one.summary, many.summary);
    assert_eq!(one.traces, many.traces);

    let s = &one.summary;
    assert_eq!(s.k, 5);
    assert_eq!(s.confusion.total() as usize, ds.len());
    assert_eq!(s.folds.iter().map(|f| f.test_size).sum::<usize>(), ds.len());
    let mean = s.fold_accuracies.iter().sum::<f64>() / 5.0;
    assert!((s.mean_accuracy - mean).abs() <= 1e-12);
    let weighted: f64 = s.folds.iter().map(|f| f.accuracy * f.test_size as f64).sum::<f64>() / ds.len() as f64;
    assert!((s.confusion.accuracy().unwrap() - weighted).abs() <= 1e-12);
    let d = s.accuracy_distribution;
    assert!(d.min <= d.q1 && d.q1 <= d.median && d.median <= d.q3 && d.q3 <= d.max);
    let mut seeds = s.fold_seeds.clone();
    seeds.dedup();
    assert_eq!(seeds.len(), 5);
    for f in &s.folds {
        assert_eq!(f.train_size + f.val_size + f.test_size, ds.len());
        assert_eq!(f.val_size, ((ds.len() - f.test_size) as f64 * 0.1).round() as usize);
    }
}

#[test]
fn diverging_fold_is_named() {
    let ds = common::blobs(5);
    let folds = make_folds(ds.labels().unwrap(), 3, 2).unwrap();
    let mut cfg = quick_config(1);
    cfg.training.lr = 1e300;
    match run_cv(&ds, &folds, &cfg, &CvOptions::default()) {
        Err(Error::Fold { fold, source }) => {
            assert_eq!(fold, 0);
            assert!(matches!(*source, Error::Divergence { .. }));
        }
        other => panic!("expected a fold error, got {other:?}"),
    }
}

#[test]
fn report_bundle() {
    let ds = common::blobs(6);
    let folds = make_folds(ds.labels().unwrap(), 3, 2).unwrap();
    let out = run_cv(&ds, &folds, &quick_config(3), &CvOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_cv_outputs(dir.path(), &out).unwrap();
    for name in ["cv_summary.json", "confusion.csv", "boxplot.svg", "trace_fold0.csv", "trace_fold2.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let back = read_summary(&dir.path().join("cv_summary.json")).unwrap();
    assert_eq!(back, out.summary);
    let svg = std::fs::read_to_string(dir.path().join("boxplot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 3);
    let trace = std::fs::read_to_string(dir.path().join("trace_fold0.csv")).unwrap();
    assert!(trace.starts_with("stage,epoch,train_loss,val_loss\nautoencoder,0,"));

    let other = tempfile::tempdir().unwrap();
    write_summary_views(other.path(), &back).unwrap();
    for name in ["confusion.csv", "boxplot.svg"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(other.path().join(name)).unwrap()
        );
    }
}

/// Sort, then interpolate at (n-1)p.
fn oracle_quantile(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    if i + 1 < s.len() {
        s[i] + (h - i as f64) * (s[i + 1] - s[i])
    } else {
        s[i]
    }
}

#[test]
fn quartiles_match_oracle() {
    let mut rng = Rng::new(12);
    let v: Vec<f64> = (0..10).map(|_| rng.unit()).collect();
    let f = boxplot_stats(&v).unwrap();
    for (got, p) in [(f.min, 0.0), (f.q1, 0.25), (f.median, 0.5), (f.q3, 0.75), (f.max, 1.0)] {
        assert!((got - oracle_quantile(&v, p)).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn boxplot_is_ordered_and_permutation_invariant(v in proptest::collection::vec(0.0f64..1.0, 1..30), seed in 0u64..1000) {
        let f = boxplot_stats(&v).unwrap();
        prop_assert!(f.min <= f.q1 && f.q1 <= f.median && f.median <= f.q3 && f.q3 <= f.max);
        let mut w = v.clone();
        Rng::new(seed).shuffle(&mut w);
        prop_assert_eq!(boxplot_stats(&w).unwrap(), f);
    }
}
