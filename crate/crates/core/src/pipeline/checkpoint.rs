//! Binary model files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! b"AE4S" | u32 version | u64 header length | JSON header
//!         | f64 buffers in header order | u64 FNV-1a of everything before it
//! ```

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Network, NetworkSpec};
use crate::preprocess::{LabelCodec, Scaler};
use crate::rng::Rng;

use super::model::Model;
use super::train::Stage;

pub const MAGIC: &[u8; 4] = b"AE4S";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub stages: Vec<StageSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    autoencoder: NetworkSpec,
    encoder_depth: usize,
    classifier: NetworkSpec,
    genes: Vec<String>,
    classes: Vec<String>,
    meta: TrainingMeta,
    buffers: Vec<BufferEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BufferEntry {
    name: String,
    len: usize,
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

fn named_buffers(model: &Model) -> Vec<(String, &[f64])> {
    let mut out: Vec<(String, &[f64])> = vec![
        ("scaler.means".into(), &model.scaler.means),
        ("scaler.stds".into(), &model.scaler.stds),
    ];
    for (n, b) in model.autoencoder.buffers() {
        out.push((format!("autoencoder.{n}"), b));
    }
    for (n, b) in model.classifier.buffers() {
        out.push((format!("classifier.{n}"), b));
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let buffers = named_buffers(m);
        let header = Header {
            autoencoder: m.autoencoder.spec().clone(),
            encoder_depth: m.encoder_depth,
            classifier: m.classifier.spec().clone(),
            genes: m.genes.clone(),
            classes: LabelCodec.names(),
            meta: self.meta.clone(),
            buffers: buffers
                .iter()
                .map(|(name, b)| BufferEntry {
                    name: name.clone(),
                    len: b.len(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(format!("header: {e}")))?;
        let payload: usize = buffers.iter().map(|(_, b)| b.len() * 8).sum();
        let mut out = Vec::with_capacity(16 + json.len() + payload + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, b) in &buffers {
            for v in *b {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader { bytes, pos: 0 };
        if &r.array::<4>()? != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported model file version {version}, expected {VERSION}"
            )));
        }
        if bytes.len() < 8 {
            return Err(Error::Format("truncated".into()));
        }
        let body = &bytes[..bytes.len() - 8];
        let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap_or([0; 8]));
        let header_len = u64::from_le_bytes(r.array()?);
        let header_len = usize::try_from(header_len).map_err(|_| Error::Format("header length overflow".into()))?;
        let json = r.take(header_len)?;
        let header: Header = serde_json::from_slice(json).map_err(|e| Error::Format(format!("header: {e}")))?;
        let payload: usize = header.buffers.iter().map(|b| b.len).try_fold(0usize, |acc, l| {
            l.checked_mul(8).and_then(|l| acc.checked_add(l))
        }).ok_or_else(|| Error::Format("buffer lengths overflow".into()))?;
        let expected = r.pos + payload + 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "file is {} bytes, header describes {expected}",
                bytes.len()
            )));
        }
        if checksum(body) != stored {
            return Err(Error::Format("checksum mismatch".into()));
        }

        let mut values: Vec<Vec<f64>> = Vec::with_capacity(header.buffers.len());
        for b in &header.buffers {
            let raw = r.take(b.len * 8)?;
            values.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap_or([0; 8])))
                    .collect(),
            );
        }
        Self::assemble(header, values)
    }

    fn assemble(header: Header, values: Vec<Vec<f64>>) -> Result<Checkpoint> {
        if header.classes != LabelCodec.names() {
            return Err(Error::Format(format!(
                "model classes {:?} differ from {:?}",
                header.classes,
                LabelCodec.names()
            )));
        }
        let mut autoencoder = Network::init(&header.autoencoder, &mut Rng::new(0))?;
        let mut classifier = Network::init(&header.classifier, &mut Rng::new(0))?;
        let mut it = header.buffers.iter().zip(values);
        let mut next = |expect: &str| -> Result<Vec<f64>> {
            match it.next() {
                Some((entry, v)) if entry.name == expect => Ok(v),
                Some((entry, _)) => Err(Error::Format(format!(
                    "buffer {} found where {expect} was expected",
                    entry.name
                ))),
                None => Err(Error::Format(format!("missing buffer {expect}"))),
            }
        };
        let means = next("scaler.means")?;
        let stds = next("scaler.stds")?;
        for (prefix, net) in [("autoencoder", &mut autoencoder), ("classifier", &mut classifier)] {
            let names: Vec<String> = net.buffers().into_iter().map(|(n, _)| n).collect();
            for (name, dst) in names.iter().zip(net.buffers_mut()) {
                let v = next(&format!("{prefix}.{name}"))?;
                if v.len() != dst.len() {
                    return Err(Error::Format(format!(
                        "{prefix}.{name} holds {} values, the architecture needs {}",
                        v.len(),
                        dst.len()
                    )));
                }
                dst.copy_from_slice(&v);
            }
        }
        if it.next().is_some() {
            return Err(Error::Format("unexpected trailing buffers".into()));
        }
        if means.len() != autoencoder.input_width() || stds.len() != means.len() {
            return Err(Error::Format(format!(
                "scaler covers {} features, the network expects {}",
                means.len(),
                autoencoder.input_width()
            )));
        }
        if header.genes.len() != means.len() {
            return Err(Error::Format(format!(
                "{} gene names for {} features",
                header.genes.len(),
                means.len()
            )));
        }
        if header.encoder_depth > autoencoder.blocks().len() {
            return Err(Error::Format(format!(
                "encoder depth {} exceeds {} autoencoder blocks",
                header.encoder_depth,
                autoencoder.blocks().len()
            )));
        }
        let code_width = autoencoder.blocks()[..header.encoder_depth]
            .last()
            .map_or(autoencoder.input_width(), |b| b.dense.weights.rows());
        if code_width != classifier.input_width() {
            return Err(Error::Format(format!(
                "code width {code_width} does not match classifier input {}",
                classifier.input_width()
            )));
        }
        Ok(Checkpoint {
            model: Model {
                autoencoder,
                encoder_depth: header.encoder_depth,
                classifier,
                scaler: Scaler::from_stats(means, stds),
                genes: header.genes,
            },
            meta: header.meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
