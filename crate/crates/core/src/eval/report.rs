use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::cv::{CvOutcome, CvSummary};

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `cv_summary.json`, `confusion.csv`, `boxplot.svg`, and one
/// `trace_fold<k>.csv` per fold.
pub fn write_cv_outputs(dir: &Path, outcome: &CvOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_vec_pretty(&outcome.summary).map_err(|e| Error::Format(e.to_string()))?;
    write(&dir.join("cv_summary.json"), &json)?;
    for (k, t) in outcome.traces.iter().enumerate() {
        write(&dir.join(format!("trace_fold{k}.csv")), t.to_csv().as_bytes())?;
    }
    write_summary_views(dir, &outcome.summary)
}

/// Files derived from a summary alone: `confusion.csv` and `boxplot.svg`.
pub fn write_summary_views(dir: &Path, summary: &CvSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("confusion.csv"), summary.confusion.to_csv().as_bytes())?;
    write(&dir.join("boxplot.svg"), render_boxplot_svg(summary).as_bytes())
}

pub fn read_summary(path: &Path) -> Result<CvSummary> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

const WIDTH: f64 = 360.0;
const HEIGHT: f64 = 400.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 360.0;

/// Boxplot of fold accuracies with the folds overlaid as points. The axis
/// spans the observed range, padded, and never exceeds [0, 1].
pub fn render_boxplot_svg(s: &CvSummary) -> String {
    let d = &s.accuracy_distribution;
    let pad = ((d.max - d.min) * 0.1).max(0.01);
    let lo = (d.min - pad).max(0.0);
    let hi = (d.max + pad).min(1.0);
    let y = |v: f64| BOTTOM - (v - lo) / (hi - lo).max(1e-12) * (BOTTOM - TOP);
    let cx = 200.0;
    let half = 40.0;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{}-fold accuracy (mean {:.4})</text>"#,
        WIDTH / 2.0,
        s.k,
        s.mean_accuracy
    );
    let _ = writeln!(o, r#"<line x1="70" y1="{TOP}" x2="70" y2="{BOTTOM}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let yy = y(v);
        let _ = writeln!(o, r#"<line x1="65" y1="{yy:.2}" x2="70" y2="{yy:.2}" stroke="black"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="60" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            yy + 4.0
        );
    }
    let _ = writeln!(
        o,
        r#"<line x1="{cx}" y1="{:.2}" x2="{cx}" y2="{:.2}" stroke="black"/>"#,
        y(d.max),
        y(d.q3)
    );
    let _ = writeln!(
        o,
        r#"<line x1="{cx}" y1="{:.2}" x2="{cx}" y2="{:.2}" stroke="black"/>"#,
        y(d.q1),
        y(d.min)
    );
    for v in [d.min, d.max] {
        let _ = writeln!(
            o,
            r#"<line x1="{}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="black"/>"#,
            cx - half / 2.0,
            y(v),
            cx + half / 2.0,
            y(v)
        );
    }
    let _ = writeln!(
        o,
        r##"<rect x="{}" y="{:.2}" width="{}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
        cx - half,
        y(d.q3),
        2.0 * half,
        (y(d.q1) - y(d.q3)).max(0.5)
    );
    let _ = writeln!(
        o,
        r#"<line x1="{}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
        cx - half,
        y(d.median),
        cx + half,
        y(d.median)
    );
    let n = s.fold_accuracies.len().max(1) as f64;
    for (i, &a) in s.fold_accuracies.iter().enumerate() {
        let px = cx + 60.0 + 40.0 * i as f64 / n;
        let _ = writeln!(
            o,
            r##"<circle cx="{px:.2}" cy="{:.2}" r="3" fill="#de2d26"><title>fold {i}: {a}</title></circle>"##,
            y(a)
        );
    }
    o.push_str("</svg>\n");
    o
}
