use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Network;
use crate::preprocess::{LabelCodec, Scaler, Subtype};

/// A trained two-stage model: the autoencoder (encoder blocks followed by
/// decoder blocks), the classifier on the code, and the input scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub autoencoder: Network,
    pub encoder_depth: usize,
    pub classifier: Network,
    pub scaler: Scaler,
    pub genes: Vec<String>,
}

impl Model {
    pub fn input_width(&self) -> usize {
        self.autoencoder.input_width()
    }

    pub fn code_width(&self) -> usize {
        self.classifier.input_width()
    }

    pub fn encoder(&self) -> Result<Network> {
        Ok(self.autoencoder.split_at(self.encoder_depth)?.0)
    }

    pub fn decoder(&self) -> Result<Network> {
        Ok(self.autoencoder.split_at(self.encoder_depth)?.1)
    }

    /// Encoder followed by classifier, as one network.
    pub fn combined(&self) -> Result<Network> {
        self.encoder()?.then(&self.classifier)
    }

    /// Codes for already-scaled inputs.
    pub fn encode(&self, x_scaled: &Matrix) -> Result<Matrix> {
        encode(&self.autoencoder, self.encoder_depth, x_scaled)
    }

    fn check_features(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::Data(format!(
                "input has {} features but the model expects {}",
                x.cols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Class probabilities for unscaled expression rows.
    pub fn predict_proba(&self, x_raw: &Matrix) -> Result<Matrix> {
        self.check_features(x_raw)?;
        let codes = self.encode(&self.scaler.apply(x_raw)?)?;
        self.classifier.predict_proba(&codes)
    }

    pub fn predict(&self, x_raw: &Matrix) -> Result<(Vec<Subtype>, Matrix)> {
        let p = self.predict_proba(x_raw)?;
        Ok((LabelCodec.decode_all(&p)?, p))
    }
}

/// Inference through the first `encoder_depth` blocks of an autoencoder.
pub fn encode(autoencoder: &Network, encoder_depth: usize, x: &Matrix) -> Result<Matrix> {
    autoencoder.infer_prefix(x, encoder_depth)
}
