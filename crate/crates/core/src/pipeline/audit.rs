//! Records which dataset rows each pipeline phase reads, so tests can prove
//! that test rows never reach fitting, resampling, or model selection.

use std::collections::BTreeSet;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ScalerFit,
    AutoencoderTrain,
    AutoencoderEarlyStopping,
    Smote,
    ClassifierTrain,
    ClassifierEarlyStopping,
    FineTuneTrain,
    FineTuneEarlyStopping,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub phase: Phase,
    pub rows: Vec<usize>,
}

#[derive(Debug, Default)]
pub struct AccessLog {
    entries: Mutex<Vec<Access>>,
}

impl AccessLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, phase: Phase, rows: &[usize]) {
        self.entries
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(Access {
                phase,
                rows: rows.to_vec(),
            });
    }

    pub fn entries(&self) -> Vec<Access> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Union of rows read during `phase`.
    pub fn rows(&self, phase: Phase) -> BTreeSet<usize> {
        self.entries()
            .into_iter()
            .filter(|a| a.phase == phase)
            .flat_map(|a| a.rows)
            .collect()
    }

    pub fn phases(&self) -> BTreeSet<Phase> {
        self.entries().into_iter().map(|a| a.phase).collect()
    }
}

pub(crate) fn note(log: Option<&AccessLog>, phase: Phase, rows: &[usize]) {
    if let Some(l) = log {
        l.record(phase, rows);
    }
}
