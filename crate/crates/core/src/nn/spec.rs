use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BN_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    /// The network emits logits; softmax is applied by the loss and by
    /// probability prediction. Only valid on the last layer.
    Softmax,
}

/// One dense layer together with whatever follows it: optional batch
/// normalisation, the activation, and optional dropout, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    #[serde(default)]
    pub batch_norm: bool,
    #[serde(default)]
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        Self {
            width,
            activation,
            batch_norm: false,
            dropout: 0.0,
        }
    }

    pub fn with_batch_norm(mut self, on: bool) -> Self {
        self.batch_norm = on;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input: usize,
    pub layers: Vec<LayerSpec>,
    #[serde(default = "default_momentum")]
    pub bn_momentum: f64,
    #[serde(default = "default_epsilon")]
    pub bn_epsilon: f64,
}

fn default_momentum() -> f64 {
    DEFAULT_BN_MOMENTUM
}

fn default_epsilon() -> f64 {
    DEFAULT_BN_EPSILON
}

/// How hidden layers of a stacked MLP are regularised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenStyle {
    pub batch_norm: bool,
    pub dropout: f64,
}

impl NetworkSpec {
    pub fn new(input: usize, layers: Vec<LayerSpec>) -> Self {
        Self {
            input,
            layers,
            bn_momentum: DEFAULT_BN_MOMENTUM,
            bn_epsilon: DEFAULT_BN_EPSILON,
        }
    }

    /// Relu hidden layers styled by `hidden`, then a bare output layer.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
        style: HiddenStyle,
    ) -> Self {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&w| {
                LayerSpec::new(w, Activation::Relu)
                    .with_batch_norm(style.batch_norm)
                    .with_dropout(style.dropout)
            })
            .collect();
        layers.push(LayerSpec::new(output, output_activation));
        Self::new(input, layers)
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(self.input, |l| l.width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 {
            return Err(Error::Spec("input width must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Spec("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.width == 0 {
                return Err(Error::Spec(format!("layer {i} has zero width")));
            }
            if !(0.0..1.0).contains(&l.dropout) {
                return Err(Error::Spec(format!(
                    "layer {i} dropout {} outside [0, 1)",
                    l.dropout
                )));
            }
            if l.activation == Activation::Softmax && i + 1 != self.layers.len() {
                return Err(Error::Spec(format!(
                    "softmax on layer {i} but only the output layer may use it"
                )));
            }
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return Err(Error::Spec(format!(
                "batch-norm momentum {} outside (0, 1)",
                self.bn_momentum
            )));
        }
        if !(self.bn_epsilon > 0.0) {
            return Err(Error::Spec(format!(
                "batch-norm epsilon {} must be positive",
                self.bn_epsilon
            )));
        }
        Ok(())
    }

    /// The spec of `self` followed by `next`; widths must chain.
    pub fn then(&self, next: &NetworkSpec) -> Result<NetworkSpec> {
        if self.output() != next.input {
            return Err(Error::Spec(format!(
                "cannot chain a {}-wide output into a {}-wide input",
                self.output(),
                next.input
            )));
        }
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        Ok(NetworkSpec {
            input: self.input,
            layers,
            bn_momentum: self.bn_momentum,
            bn_epsilon: self.bn_epsilon,
        })
    }
}
