use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Subtype, NUM_CLASSES};

/// Rows are true classes, columns predicted classes, both in [`Subtype`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Eval("accuracy of an empty confusion matrix is undefined".into()));
        }
        Ok(self.correct() as f64 / total as f64)
    }

    /// Recall per class; `None` where the class never occurs.
    pub fn per_class_recall(&self) -> [Option<f64>; NUM_CLASSES] {
        let mut out = [None; NUM_CLASSES];
        for (c, row) in self.counts.iter().enumerate() {
            let n: u64 = row.iter().sum();
            if n > 0 {
                out[c] = Some(row[c] as f64 / n as f64);
            }
        }
        out
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
    }

    /// `true\predicted,Basal,Her2,LumA,LumB` then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for c in Subtype::ALL {
            s.push(',');
            s.push_str(c.name());
        }
        s.push('\n');
        for c in Subtype::ALL {
            s.push_str(c.name());
            for v in self.counts[c.index()] {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(truth: &[Subtype], predicted: &[Subtype]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Eval(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

/// Five-number summary for a boxplot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics at
/// position `(n - 1) · p` of the sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn boxplot_stats(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::Eval("boxplot of no values".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Eval("boxplot input contains NaN".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(FiveNumber {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
    })
}
