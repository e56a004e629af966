use serde::{Deserialize, Serialize};

use crate::data::split::batches;
use crate::data::{Dataset, SplitPlan};
use crate::error::{Error, Result};
use crate::eval::metrics::{confusion, ConfusionMatrix};
use crate::matrix::Matrix;
use crate::nn::Network;
use crate::optim::{AdamState, Loss};
use crate::preprocess::{balance_classes, LabelCodec, Scaler, Subtype};
use crate::rng::{derive_seed, Rng};

use super::audit::{note, AccessLog, Phase};
use super::checkpoint::{Checkpoint, StageSummary, TrainingMeta};
use super::config::{PipelineConfig, SmoteSpace, TrainingConfig};
use super::model::{encode, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Autoencoder,
    Classifier,
    FineTune,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Autoencoder => "autoencoder",
            Stage::Classifier => "classifier",
            Stage::FineTune => "fine_tune",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Row-weighted mean of the minibatch losses, measured in training mode.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: Stage,
    pub epochs: Vec<EpochLoss>,
    /// Epoch whose weights were kept.
    pub best_epoch: Option<usize>,
    pub best_loss: Option<f64>,
}

impl StageTrace {
    fn empty(stage: Stage) -> Self {
        Self {
            stage,
            epochs: Vec::new(),
            best_epoch: None,
            best_loss: None,
        }
    }

    pub fn summary(&self) -> StageSummary {
        StageSummary {
            stage: self.stage,
            epochs_run: self.epochs.len(),
            best_epoch: self.best_epoch,
            best_loss: self.best_loss,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub stages: Vec<StageTrace>,
}

impl TrainTrace {
    pub fn stage(&self, stage: Stage) -> Option<&StageTrace> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// `stage,epoch,train_loss,val_loss`; an absent validation loss is empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,epoch,train_loss,val_loss\n");
        for st in &self.stages {
            for e in &st.epochs {
                let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
                s.push_str(&format!("{},{},{},{}\n", st.stage.name(), e.epoch, e.train_loss, val));
            }
        }
        s
    }
}

/// Minibatch Adam with early stopping. The monitored loss is the validation
/// loss when a validation set is given, otherwise the epoch training loss.
/// On return `net` holds the weights of the best epoch.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    net: &mut Network,
    x: &Matrix,
    y: &Matrix,
    val: Option<(&Matrix, &Matrix)>,
    loss: Loss,
    cfg: &TrainingConfig,
    stage: Stage,
    rng: &mut Rng,
) -> Result<StageTrace> {
    cfg.validate()?;
    if x.rows() != y.rows() {
        return Err(Error::Shape {
            op: "fit",
            left: x.shape(),
            right: y.shape(),
        });
    }
    if x.rows() < 2 {
        return Err(Error::Param(format!(
            "{} training needs at least 2 rows, got {}",
            stage.name(),
            x.rows()
        )));
    }
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(cfg.lr, &sizes);
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut trace = StageTrace::empty(stage);
    let mut best: Option<(f64, Network)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        let mut total = 0.0;
        for batch in batches(&rows, cfg.batch_size, rng)? {
            let xb = x.select_rows(&batch);
            let yb = y.select_rows(&batch);
            let (out, cache) = net.forward_train(&xb, rng)?;
            let lv = loss.evaluate(&out, &yb)?;
            if !lv.value.is_finite() {
                return Err(Error::Divergence {
                    stage: stage.name(),
                    epoch,
                });
            }
            let (_, grads) = net.backward(&cache, &lv.grad)?;
            adam.step(&mut net.params_mut(), &grads.tensors)?;
            total += lv.value * batch.len() as f64;
        }
        let train_loss = total / x.rows() as f64;
        let val_loss = match val {
            Some((vx, vy)) => Some(loss.evaluate(&net.infer(vx)?, vy)?.value),
            None => None,
        };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() {
            return Err(Error::Divergence {
                stage: stage.name(),
                epoch,
            });
        }
        trace.epochs.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        log::debug!("{} epoch {epoch}: train {train_loss:.6} val {val_loss:?}", stage.name());

        if best.as_ref().is_none_or(|(b, _)| monitored < *b) {
            best = Some((monitored, net.clone()));
            trace.best_epoch = Some(epoch);
            trace.best_loss = Some(monitored);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, b)) = best {
        *net = b;
    }
    Ok(trace)
}

fn validation_pair(x: &Matrix) -> Option<(&Matrix, &Matrix)> {
    (x.rows() > 0).then_some((x, x))
}

/// Fresh autoencoder (encoder then decoder) trained to reconstruct scaled
/// inputs under MSE.
pub fn train_autoencoder(
    x_train: &Matrix,
    x_val: &Matrix,
    cfg: &PipelineConfig,
    rng: &mut Rng,
) -> Result<(Network, StageTrace)> {
    let specs = &cfg.specs;
    let mut net = Network::init(&specs.encoder.then(&specs.decoder)?, rng)?;
    let trace = fit(
        &mut net,
        x_train,
        x_train,
        validation_pair(x_val),
        Loss::Mse,
        &cfg.training,
        Stage::Autoencoder,
        rng,
    )?;
    Ok((net, trace))
}

/// Fresh classifier trained on codes under softmax cross-entropy.
pub fn train_classifier(
    codes_train: &Matrix,
    y_train: &[Subtype],
    codes_val: &Matrix,
    y_val: &[Subtype],
    cfg: &PipelineConfig,
    rng: &mut Rng,
) -> Result<(Network, StageTrace)> {
    let mut net = Network::init(&cfg.specs.classifier, rng)?;
    let trace = fit_classifier(&mut net, codes_train, y_train, codes_val, y_val, &cfg.training, Stage::Classifier, rng)?;
    Ok((net, trace))
}

#[allow(clippy::too_many_arguments)]
fn fit_classifier(
    net: &mut Network,
    x_train: &Matrix,
    y_train: &[Subtype],
    x_val: &Matrix,
    y_val: &[Subtype],
    cfg: &TrainingConfig,
    stage: Stage,
    rng: &mut Rng,
) -> Result<StageTrace> {
    let yt = LabelCodec.encode_all(y_train);
    let yv = LabelCodec.encode_all(y_val);
    let val = (x_val.rows() > 0).then_some((x_val, &yv));
    fit(net, x_train, &yt, val, Loss::SoftmaxCrossEntropy, cfg, stage, rng)
}

/// SMOTE-balances `x` by class, returning rows and their labels.
fn balance(x: &Matrix, labels: &[Subtype], k: usize, seed: u64) -> Result<(Matrix, Vec<Subtype>)> {
    let idx: Vec<usize> = labels.iter().map(|s| s.index()).collect();
    let (xb, yb) = balance_classes(x, &idx, k, &mut Rng::new(seed))?;
    let yb = yb.into_iter().map(Subtype::from_index).collect::<Result<Vec<_>>>()?;
    Ok((xb, yb))
}

/// Predictions on the held-out rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub indices: Vec<usize>,
    pub truth: Vec<Subtype>,
    pub predicted: Vec<Subtype>,
    pub probabilities: Matrix,
    pub confusion: ConfusionMatrix,
}

impl TestReport {
    pub fn accuracy(&self) -> Result<f64> {
        self.confusion.accuracy()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub checkpoint: Checkpoint,
    pub trace: TrainTrace,
    pub test: TestReport,
}

// Independent random streams per step, derived from the run seed.
pub const STREAM_AE: u64 = 1;
const STREAM_SMOTE: u64 = 2;
pub const STREAM_CLF: u64 = 3;
const STREAM_FT_SMOTE: u64 = 4;
const STREAM_FT: u64 = 5;

/// Scale, autoencode, balance, classify, optionally fine-tune, then evaluate
/// on the test rows. Only `split.train` rows are fitted on; `split.val` rows
/// drive early stopping; `split.test` rows are touched once, at evaluation.
pub fn run_pipeline(ds: &Dataset, split: &SplitPlan, cfg: &PipelineConfig, audit: Option<&AccessLog>) -> Result<PipelineRun> {
    let labels = ds.labels()?;
    if ds.x.cols() != cfg.specs.encoder.input {
        return Err(Error::Data(format!(
            "data has {} features but the network expects {}",
            ds.x.cols(),
            cfg.specs.encoder.input
        )));
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    let (y_train, y_val) = (pick(&split.train), pick(&split.val));

    note(audit, Phase::ScalerFit, &split.train);
    let scaler = Scaler::fit(&ds.x.select_rows(&split.train))?;
    let x_train = scaler.apply(&ds.x.select_rows(&split.train))?;
    let x_val = scaler.apply(&ds.x.select_rows(&split.val))?;

    note(audit, Phase::AutoencoderTrain, &split.train);
    note(audit, Phase::AutoencoderEarlyStopping, &split.val);
    let mut ae_rng = Rng::new(derive_seed(cfg.seed, STREAM_AE));
    let (mut autoencoder, ae_trace) = train_autoencoder(&x_train, &x_val, cfg, &mut ae_rng)?;
    let depth = cfg.specs.encoder.layers.len();

    let t = &cfg.training;
    note(audit, Phase::Smote, &split.train);
    let smote_seed = derive_seed(cfg.seed, STREAM_SMOTE);
    let (codes_train, y_bal) = match t.smote_space {
        SmoteSpace::Code => balance(&encode(&autoencoder, depth, &x_train)?, &y_train, t.smote_k, smote_seed)?,
        SmoteSpace::Raw => {
            let (xb, yb) = balance(&x_train, &y_train, t.smote_k, smote_seed)?;
            (encode(&autoencoder, depth, &xb)?, yb)
        }
    };
    let codes_val = encode(&autoencoder, depth, &x_val)?;

    note(audit, Phase::ClassifierTrain, &split.train);
    note(audit, Phase::ClassifierEarlyStopping, &split.val);
    let mut clf_rng = Rng::new(derive_seed(cfg.seed, STREAM_CLF));
    let (mut classifier, clf_trace) = train_classifier(&codes_train, &y_bal, &codes_val, &y_val, cfg, &mut clf_rng)?;

    let mut trace = TrainTrace {
        stages: vec![ae_trace, clf_trace],
    };

    if t.fine_tune_encoder {
        note(audit, Phase::Smote, &split.train);
        note(audit, Phase::FineTuneTrain, &split.train);
        note(audit, Phase::FineTuneEarlyStopping, &split.val);
        let (xb, yb) = balance(&x_train, &y_train, t.smote_k, derive_seed(cfg.seed, STREAM_FT_SMOTE))?;
        let (encoder, decoder) = autoencoder.split_at(depth)?;
        let mut joint = encoder.then(&classifier)?;
        let mut ft_rng = Rng::new(derive_seed(cfg.seed, STREAM_FT));
        let ft_trace = fit_classifier(&mut joint, &xb, &yb, &x_val, &y_val, t, Stage::FineTune, &mut ft_rng)?;
        let (encoder, clf) = joint.split_at(depth)?;
        autoencoder = encoder.then(&decoder)?;
        classifier = clf;
        trace.stages.push(ft_trace);
    }

    let model = Model {
        autoencoder,
        encoder_depth: depth,
        classifier,
        scaler,
        genes: ds.genes.clone(),
    };

    note(audit, Phase::Evaluate, &split.test);
    let (predicted, probabilities) = model.predict(&ds.x.select_rows(&split.test))?;
    let truth = pick(&split.test);
    let test = TestReport {
        indices: split.test.clone(),
        confusion: confusion(&truth, &predicted)?,
        truth,
        predicted,
        probabilities,
    };
    let meta = TrainingMeta {
        seed: cfg.seed,
        stages: trace.stages.iter().map(StageTrace::summary).collect(),
    };
    Ok(PipelineRun {
        checkpoint: Checkpoint { model, meta },
        trace,
        test,
    })
}
