use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::spec::{DEFAULT_BN_EPSILON, DEFAULT_BN_MOMENTUM};
use crate::nn::{Activation, LayerSpec, NetworkSpec};
use crate::optim::adam::DEFAULT_LR;
use crate::preprocess::smote::DEFAULT_K;
use crate::preprocess::NUM_CLASSES;

/// Where SMOTE interpolates: between encoded training samples (the default)
/// or between scaled input rows before encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteSpace {
    Code,
    Raw,
}

/// Layer widths and regularisation for both stages. The input width comes
/// from the data, so it is supplied when specs are built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureConfig {
    /// Encoder layer widths; the last is the code width.
    pub encoder_widths: Vec<usize>,
    /// Decoder hidden widths; a final layer back to the input width is implied.
    pub decoder_widths: Vec<usize>,
    /// Classifier hidden widths; a final 4-way softmax layer is implied.
    pub classifier_widths: Vec<usize>,
    pub ae_dropout: f64,
    pub clf_dropout: f64,
    pub batch_norm: bool,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            encoder_widths: vec![5000, 2000, 500],
            decoder_widths: vec![2000, 5000],
            classifier_widths: vec![300, 120, 50, 25],
            ae_dropout: 0.2,
            clf_dropout: 0.5,
            batch_norm: true,
            bn_momentum: DEFAULT_BN_MOMENTUM,
            bn_epsilon: DEFAULT_BN_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpecs {
    pub encoder: NetworkSpec,
    pub decoder: NetworkSpec,
    pub classifier: NetworkSpec,
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, rate) in [("ae_dropout", self.ae_dropout), ("clf_dropout", self.clf_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Param(format!("{key} = {rate} outside [0, 1)")));
            }
        }
        if self.encoder_widths.is_empty() {
            return Err(Error::Param("encoder_widths must name at least the code layer".into()));
        }
        for (key, ws) in [
            ("encoder_widths", &self.encoder_widths),
            ("decoder_widths", &self.decoder_widths),
            ("classifier_widths", &self.classifier_widths),
        ] {
            if ws.contains(&0) {
                return Err(Error::Param(format!("{key} contains a zero width")));
            }
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return Err(Error::Param(format!("bn_momentum = {} outside (0, 1)", self.bn_momentum)));
        }
        if !(self.bn_epsilon > 0.0) {
            return Err(Error::Param(format!("bn_epsilon = {} must be positive", self.bn_epsilon)));
        }
        Ok(())
    }

    pub fn code_width(&self) -> usize {
        self.encoder_widths.last().copied().unwrap_or(0)
    }

    /// Every hidden layer, the code layer included, is relu with batch-norm
    /// and dropout. The decoder output is linear; the classifier output is
    /// softmax.
    pub fn build(&self, input: usize) -> Result<StageSpecs> {
        self.validate()?;
        let hidden = |w: usize, rate: f64| {
            LayerSpec::new(w, Activation::Relu)
                .with_batch_norm(self.batch_norm)
                .with_dropout(rate)
        };
        let finish = |input: usize, layers: Vec<LayerSpec>| NetworkSpec {
            input,
            layers,
            bn_momentum: self.bn_momentum,
            bn_epsilon: self.bn_epsilon,
        };
        let code = self.code_width();
        let enc: Vec<LayerSpec> = self.encoder_widths.iter().map(|&w| hidden(w, self.ae_dropout)).collect();

        let mut dec: Vec<LayerSpec> = self.decoder_widths.iter().map(|&w| hidden(w, self.ae_dropout)).collect();
        dec.push(LayerSpec::new(input, Activation::Linear));

        let mut clf: Vec<LayerSpec> = self
            .classifier_widths
            .iter()
            .map(|&w| hidden(w, self.clf_dropout))
            .collect();
        clf.push(LayerSpec::new(NUM_CLASSES, Activation::Softmax));

        let specs = StageSpecs {
            encoder: finish(input, enc),
            decoder: finish(code, dec),
            classifier: finish(code, clf),
        };
        for s in [&specs.encoder, &specs.decoder, &specs.classifier] {
            s.validate()?;
        }
        Ok(specs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub fine_tune_encoder: bool,
    pub smote_k: usize,
    pub smote_space: SmoteSpace,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            batch_size: 32,
            max_epochs: 300,
            patience: 20,
            fine_tune_encoder: false,
            smote_k: DEFAULT_K,
            smote_space: SmoteSpace::Code,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Param(format!("lr = {} must be positive", self.lr)));
        }
        if self.batch_size < 2 {
            return Err(Error::Param(format!(
                "batch_size = {} must be at least 2",
                self.batch_size
            )));
        }
        if self.patience == 0 {
            return Err(Error::Param("patience must be at least 1".into()));
        }
        if self.smote_k == 0 {
            return Err(Error::Param("smote_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything one pipeline run needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub specs: StageSpecs,
    pub training: TrainingConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(arch: &ArchitectureConfig, training: TrainingConfig, input: usize, seed: u64) -> Result<Self> {
        training.validate()?;
        let specs = arch.build(input)?;
        Ok(Self { specs, training, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}
