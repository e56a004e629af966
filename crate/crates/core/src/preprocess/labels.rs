use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const NUM_CLASSES: usize = 4;

/// PAM50 intrinsic subtype. The discriminant is the class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subtype {
    Basal = 0,
    Her2 = 1,
    LumA = 2,
    LumB = 3,
}

impl Subtype {
    pub const ALL: [Subtype; NUM_CLASSES] = [Subtype::Basal, Subtype::Her2, Subtype::LumA, Subtype::LumB];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Subtype> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Label(format!("class index {i} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Subtype::Basal => "Basal",
            Subtype::Her2 => "Her2",
            Subtype::LumA => "LumA",
            Subtype::LumB => "LumB",
        }
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                Error::Label(format!(
                    "unknown subtype {s:?}; expected one of Basal, Her2, LumA, LumB"
                ))
            })
    }
}

/// Fixed mapping between class names and one-hot positions:
/// Basal=0, Her2=1, LumA=2, LumB=3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCodec;

impl LabelCodec {
    pub fn names(&self) -> Vec<String> {
        Subtype::ALL.iter().map(|s| s.name().to_string()).collect()
    }

    pub fn encode(&self, label: Subtype) -> [f64; NUM_CLASSES] {
        let mut v = [0.0; NUM_CLASSES];
        v[label.index()] = 1.0;
        v
    }

    pub fn encode_name(&self, name: &str) -> Result<[f64; NUM_CLASSES]> {
        Ok(self.encode(name.parse()?))
    }

    /// Argmax; ties go to the lowest index.
    pub fn decode(&self, row: &[f64]) -> Result<Subtype> {
        if row.len() != NUM_CLASSES {
            return Err(Error::Label(format!(
                "expected {NUM_CLASSES} scores, got {}",
                row.len()
            )));
        }
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        Subtype::from_index(best)
    }

    pub fn encode_all(&self, labels: &[Subtype]) -> Matrix {
        let mut m = Matrix::zeros(labels.len(), NUM_CLASSES);
        for (i, l) in labels.iter().enumerate() {
            m.set(i, l.index(), 1.0);
        }
        m
    }

    pub fn decode_all(&self, scores: &Matrix) -> Result<Vec<Subtype>> {
        scores.row_iter().map(|r| self.decode(r)).collect()
    }
}
