use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::layers::{relu, relu_backward, BatchNormCache, BatchNormLayer, DenseLayer, DropoutLayer};
use crate::nn::spec::{Activation, LayerSpec, NetworkSpec};
use crate::optim::loss::softmax_rows;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A dense layer plus its optional batch-norm, activation, and dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub dense: DenseLayer,
    pub norm: Option<BatchNormLayer>,
    pub activation: Activation,
    pub dropout: Option<DropoutLayer>,
    /// Frozen blocks still pass gradients through but report none for themselves.
    pub frozen: bool,
}

impl Block {
    fn init(fan_in: usize, layer: &LayerSpec, spec: &NetworkSpec, rng: &mut Rng) -> Result<Self> {
        let dense = DenseLayer::glorot(fan_in, layer.width, !layer.batch_norm, rng);
        let norm = layer
            .batch_norm
            .then(|| BatchNormLayer::new(layer.width, spec.bn_momentum, spec.bn_epsilon));
        let dropout = if layer.dropout > 0.0 {
            Some(DropoutLayer::new(layer.dropout)?)
        } else {
            None
        };
        Ok(Self {
            dense,
            norm,
            activation: layer.activation,
            dropout,
            frozen: false,
        })
    }

    fn activate(&self, pre: &Matrix) -> Matrix {
        match self.activation {
            Activation::Relu => relu(pre),
            Activation::Linear | Activation::Softmax => pre.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Matrix,
    norm: Option<BatchNormCache>,
    pre_activation: Matrix,
    mask: Option<Vec<f64>>,
}

/// Intermediates recorded by a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    blocks: Vec<BlockCache>,
}

/// The dropout multipliers drawn during one forward pass, per block.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks(pub Vec<Option<Vec<f64>>>);

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dropout_masks(&self) -> DropoutMasks {
        DropoutMasks(self.blocks.iter().map(|b| b.mask.clone()).collect())
    }
}

/// Gradients for every trainable tensor, in [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

enum MaskSource<'a> {
    Sample(&'a mut Rng),
    Replay(&'a DropoutMasks),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    blocks: Vec<Block>,
}

impl Network {
    pub fn init(spec: &NetworkSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::with_capacity(spec.layers.len());
        let mut fan_in = spec.input;
        for layer in &spec.layers {
            blocks.push(Block::init(fan_in, layer, spec, rng)?);
            fan_in = layer.width;
        }
        Ok(Self {
            spec: spec.clone(),
            blocks,
        })
    }

    /// Assembles a network from explicit blocks; the spec is checked against them.
    pub fn from_blocks(spec: NetworkSpec, blocks: Vec<Block>) -> Result<Self> {
        spec.validate()?;
        if spec.layers.len() != blocks.len() {
            return Err(Error::Spec(format!(
                "{} layer specs for {} blocks",
                spec.layers.len(),
                blocks.len()
            )));
        }
        let mut fan_in = spec.input;
        for (i, (layer, block)) in spec.layers.iter().zip(&blocks).enumerate() {
            let d = &block.dense;
            let bn_ok = match &block.norm {
                Some(bn) => layer.batch_norm && bn.width() == layer.width,
                None => !layer.batch_norm,
            };
            let bias_ok = d.bias.as_ref().map_or(true, |b| b.len() == layer.width);
            let drop_ok = match block.dropout {
                Some(dp) => dp.rate == layer.dropout,
                None => layer.dropout == 0.0,
            };
            if d.fan_in() != fan_in
                || d.fan_out() != layer.width
                || !bn_ok
                || !bias_ok
                || !drop_ok
                || block.activation != layer.activation
            {
                return Err(Error::Spec(format!("block {i} does not match its layer spec")));
            }
            fan_in = layer.width;
        }
        Ok(Self { spec, blocks })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn input_width(&self) -> usize {
        self.spec.input
    }

    pub fn output_width(&self) -> usize {
        self.spec.output()
    }

    pub fn set_frozen(&mut self, range: Range<usize>, frozen: bool) {
        for b in &mut self.blocks[range] {
            b.frozen = frozen;
        }
    }

    pub fn freeze_all(&mut self) {
        let n = self.blocks.len();
        self.set_frozen(0..n, true);
    }

    /// Splits after the first `at` blocks.
    pub fn split_at(&self, at: usize) -> Result<(Network, Network)> {
        if at == 0 || at >= self.blocks.len() {
            return Err(Error::Spec(format!(
                "cannot split a {}-block network at {at}",
                self.blocks.len()
            )));
        }
        let head_spec = NetworkSpec {
            input: self.spec.input,
            layers: self.spec.layers[..at].to_vec(),
            ..self.spec.clone()
        };
        let tail_spec = NetworkSpec {
            input: self.spec.layers[at - 1].width,
            layers: self.spec.layers[at..].to_vec(),
            ..self.spec.clone()
        };
        Ok((
            Network::from_blocks(head_spec, self.blocks[..at].to_vec())?,
            Network::from_blocks(tail_spec, self.blocks[at..].to_vec())?,
        ))
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Network) -> Result<Network> {
        let spec = self.spec.then(&next.spec)?;
        let mut blocks = self.blocks.clone();
        blocks.extend(next.blocks.iter().cloned());
        Network::from_blocks(spec, blocks)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.spec.input {
            return Err(Error::Shape {
                op: "network input",
                left: x.shape(),
                right: (x.rows(), self.spec.input),
            });
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode, rng: &mut Rng) -> Result<(Matrix, ForwardCache)> {
        match mode {
            Mode::Train => self.forward_train(x, rng),
            Mode::Infer => Ok((
                self.infer(x)?,
                ForwardCache {
                    mode: Mode::Infer,
                    blocks: Vec::new(),
                },
            )),
        }
    }

    /// Train-mode pass: batch statistics, fresh dropout masks, running stats updated.
    pub fn forward_train(&mut self, x: &Matrix, rng: &mut Rng) -> Result<(Matrix, ForwardCache)> {
        self.run_train(x, MaskSource::Sample(rng))
    }

    /// Train-mode pass reusing previously drawn dropout masks.
    pub fn forward_replay(&mut self, x: &Matrix, masks: &DropoutMasks) -> Result<(Matrix, ForwardCache)> {
        if masks.0.len() != self.blocks.len() {
            return Err(Error::State(format!(
                "{} dropout masks for {} blocks",
                masks.0.len(),
                self.blocks.len()
            )));
        }
        self.run_train(x, MaskSource::Replay(masks))
    }

    fn run_train(&mut self, x: &Matrix, mut masks: MaskSource<'_>) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for (i, block) in self.blocks.iter_mut().enumerate() {
            let z = block.dense.forward(&h)?;
            let (pre, norm) = match block.norm.as_mut() {
                Some(bn) => {
                    let (y, c) = bn.forward_train(&z);
                    (y, Some(c))
                }
                None => (z, None),
            };
            let a = block.activate(&pre);
            let (out, mask) = match block.dropout {
                Some(dp) => {
                    let mask = match &mut masks {
                        MaskSource::Sample(rng) => dp.sample_mask(a.as_slice().len(), rng),
                        MaskSource::Replay(m) => m.0[i].clone().ok_or_else(|| {
                            Error::State(format!("no dropout mask recorded for block {i}"))
                        })?,
                    };
                    (DropoutLayer::apply_mask(&a, &mask)?, Some(mask))
                }
                None => (a, None),
            };
            caches.push(BlockCache {
                input: std::mem::replace(&mut h, out),
                norm,
                pre_activation: pre,
                mask,
            });
        }
        Ok((
            h,
            ForwardCache {
                mode: Mode::Train,
                blocks: caches,
            },
        ))
    }

    /// Inference pass: running statistics, no dropout, no state change.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        self.infer_prefix(x, self.blocks.len())
    }

    /// Inference through the first `depth` blocks only.
    pub fn infer_prefix(&self, x: &Matrix, depth: usize) -> Result<Matrix> {
        if depth > self.blocks.len() {
            return Err(Error::State(format!(
                "prefix of {depth} blocks requested from a {}-block network",
                self.blocks.len()
            )));
        }
        self.check_input(x)?;
        let mut h = x.clone();
        for block in &self.blocks[..depth] {
            let z = block.dense.forward(&h)?;
            let pre = match &block.norm {
                Some(bn) => bn.forward_infer(&z),
                None => z,
            };
            h = block.activate(&pre);
        }
        Ok(h)
    }

    /// Class probabilities for a softmax-output network; raw outputs otherwise.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let out = self.infer(x)?;
        Ok(match self.blocks.last().map(|b| b.activation) {
            Some(Activation::Softmax) => softmax_rows(&out),
            _ => out,
        })
    }

    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Result<(Matrix, Gradients)> {
        if cache.mode != Mode::Train {
            return Err(Error::State("backward needs a train-mode forward cache".into()));
        }
        if cache.blocks.len() != self.blocks.len() {
            return Err(Error::State(format!(
                "cache has {} blocks, network has {}",
                cache.blocks.len(),
                self.blocks.len()
            )));
        }
        let mut per_block: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.blocks.len());
        let mut g = grad_out.clone();
        for (i, (block, c)) in self.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            if g.shape() != c.pre_activation.shape() {
                return Err(Error::State(format!(
                    "gradient {:?} does not match block {i} output {:?}",
                    g.shape(),
                    c.pre_activation.shape()
                )));
            }
            if let Some(mask) = &c.mask {
                g = DropoutLayer::apply_mask(&g, mask)?;
            }
            if block.activation == Activation::Relu {
                g = relu_backward(&c.pre_activation, &g);
            }
            let mut tensors = Vec::new();
            if let (Some(bn), Some(bc)) = (&block.norm, &c.norm) {
                let (gi, bg) = bn.backward(bc, &g);
                g = gi;
                tensors.push(bg.gamma);
                tensors.push(bg.beta);
            } else if block.norm.is_some() {
                return Err(Error::State(format!("block {i} cache lacks batch statistics")));
            }
            let (gi, dg) = block.dense.backward(&c.input, &g)?;
            g = gi;
            let mut dense_tensors = vec![dg.weights.into_vec()];
            if let Some(b) = dg.bias {
                dense_tensors.push(b);
            }
            dense_tensors.extend(tensors);
            per_block.push(if block.frozen { Vec::new() } else { dense_tensors });
        }
        per_block.reverse();
        Ok((
            g,
            Gradients {
                tensors: per_block.into_iter().flatten().collect(),
            },
        ))
    }

    /// Trainable tensors: per unfrozen block, weights, bias, gamma, beta.
    pub fn params(&self) -> Vec<&[f64]> {
        self.blocks
            .iter()
            .filter(|b| !b.frozen)
            .flat_map(block_params)
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for b in self.blocks.iter_mut().filter(|b| !b.frozen) {
            out.push(b.dense.weights.as_mut_slice());
            if let Some(bias) = b.dense.bias.as_mut() {
                out.push(bias.as_mut_slice());
            }
            if let Some(bn) = b.norm.as_mut() {
                out.push(bn.gamma.as_mut_slice());
                out.push(bn.beta.as_mut_slice());
            }
        }
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.frozen)
            .flat_map(|(i, b)| {
                block_buffer_names(i, b)
                    .into_iter()
                    .filter(|n| !n.ends_with("running_mean") && !n.ends_with("running_var"))
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Every stored buffer, frozen or not, including running statistics.
    pub fn buffers(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let names = block_buffer_names(i, b);
            let mut vals: Vec<&[f64]> = block_params(b);
            if let Some(bn) = &b.norm {
                vals.push(&bn.running_mean);
                vals.push(&bn.running_var);
            }
            out.extend(names.into_iter().zip(vals));
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for b in &mut self.blocks {
            out.push(b.dense.weights.as_mut_slice());
            if let Some(bias) = b.dense.bias.as_mut() {
                out.push(bias.as_mut_slice());
            }
            if let Some(bn) = b.norm.as_mut() {
                out.push(bn.gamma.as_mut_slice());
                out.push(bn.beta.as_mut_slice());
                out.push(bn.running_mean.as_mut_slice());
                out.push(bn.running_var.as_mut_slice());
            }
        }
        out
    }
}

fn block_params(b: &Block) -> Vec<&[f64]> {
    let mut out: Vec<&[f64]> = vec![b.dense.weights.as_slice()];
    if let Some(bias) = &b.dense.bias {
        out.push(bias);
    }
    if let Some(bn) = &b.norm {
        out.push(&bn.gamma);
        out.push(&bn.beta);
    }
    out
}

fn block_buffer_names(i: usize, b: &Block) -> Vec<String> {
    let mut names = vec![format!("block{i}.weights")];
    if b.dense.bias.is_some() {
        names.push(format!("block{i}.bias"));
    }
    if b.norm.is_some() {
        for n in ["gamma", "beta", "running_mean", "running_var"] {
            names.push(format!("block{i}.{n}"));
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::HiddenStyle;

    fn toy_spec() -> NetworkSpec {
        NetworkSpec::mlp(
            6,
            &[5, 4],
            3,
            Activation::Softmax,
            HiddenStyle {
                batch_norm: true,
                dropout: 0.5,
            },
        )
    }

    fn random(rng: &mut Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn init_shapes_and_defaults() {
        let mut rng = Rng::new(0);
        let net = Network::init(&toy_spec(), &mut rng).unwrap();
        assert_eq!(net.blocks().len(), 3);
        let b0 = &net.blocks()[0];
        assert_eq!(b0.dense.weights.shape(), (5, 6));
        assert!(b0.dense.bias.is_none());
        let bn = b0.norm.as_ref().unwrap();
        assert!(bn.gamma.iter().all(|&g| g == 1.0));
        assert!(bn.beta.iter().all(|&g| g == 0.0));
        assert!(bn.running_mean.iter().all(|&g| g == 0.0));
        assert!(bn.running_var.iter().all(|&g| g == 1.0));
        let out = &net.blocks()[2];
        assert_eq!(out.dense.bias.as_deref(), Some(&[0.0; 3][..]));
        assert!(out.norm.is_none() && out.dropout.is_none());
    }

    #[test]
    fn inference_is_bit_identical() {
        let mut rng = Rng::new(1);
        let mut net = Network::init(&toy_spec(), &mut rng).unwrap();
        let x = random(&mut rng, 8, 6);
        net.forward_train(&x, &mut rng).unwrap();
        let a = net.infer(&x).unwrap();
        let b = net.infer(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_width_mismatch() {
        let mut rng = Rng::new(1);
        let net = Network::init(&toy_spec(), &mut rng).unwrap();
        assert!(matches!(net.infer(&Matrix::zeros(2, 5)), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let mut rng = Rng::new(2);
        let mut net = Network::init(&toy_spec(), &mut rng).unwrap();
        let x = random(&mut rng, 4, 6);
        let (y, infer_cache) = net.forward(&x, Mode::Infer, &mut rng).unwrap();
        assert!(matches!(net.backward(&infer_cache, &y), Err(Error::State(_))));

        let other_spec = NetworkSpec::new(6, vec![LayerSpec::new(3, Activation::Linear)]);
        let mut other = Network::init(&other_spec, &mut rng).unwrap();
        let (y2, cache2) = other.forward_train(&x, &mut rng).unwrap();
        assert!(matches!(net.backward(&cache2, &y2), Err(Error::State(_))));
    }

    #[test]
    fn replayed_masks_reproduce_output() {
        let mut rng = Rng::new(3);
        let mut net = Network::init(&toy_spec(), &mut rng).unwrap();
        let x = random(&mut rng, 6, 6);
        let (y, cache) = net.forward_train(&x, &mut rng).unwrap();
        let (y2, _) = net.forward_replay(&x, &cache.dropout_masks()).unwrap();
        assert_eq!(y, y2);
    }

    #[test]
    fn split_and_rejoin_compose_exactly() {
        let mut rng = Rng::new(4);
        let mut net = Network::init(&toy_spec(), &mut rng).unwrap();
        let x = random(&mut rng, 10, 6);
        net.forward_train(&x, &mut rng).unwrap();
        let (head, tail) = net.split_at(2).unwrap();
        let composed = tail.infer(&head.infer(&x).unwrap()).unwrap();
        assert_eq!(composed, net.infer(&x).unwrap());
        assert_eq!(head.then(&tail).unwrap(), net);
    }

    #[test]
    fn frozen_blocks_report_no_gradients() {
        let mut rng = Rng::new(5);
        let mut net = Network::init(&toy_spec(), &mut rng).unwrap();
        let all = net.param_names();
        net.set_frozen(0..1, true);
        let names = net.param_names();
        assert!(names.iter().all(|n| !n.starts_with("block0.")));
        assert_eq!(all.len(), names.len() + 3);
        let x = random(&mut rng, 4, 6);
        let (y, cache) = net.forward_train(&x, &mut rng).unwrap();
        let (_, grads) = net.backward(&cache, &y).unwrap();
        assert_eq!(grads.tensors.len(), names.len());
        for (g, p) in grads.tensors.iter().zip(net.params()) {
            assert_eq!(g.len(), p.len());
        }
    }

    #[test]
    fn buffers_cover_running_stats() {
        let mut rng = Rng::new(6);
        let mut net = Network::init(&toy_spec(), &mut rng).unwrap();
        let named = net.buffers().len();
        assert_eq!(named, net.buffers_mut().len());
        // BN blocks: weights plus four norm buffers; output block: weights, bias
        assert_eq!(named, 5 + 5 + 2);
    }
}
