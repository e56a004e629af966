//! The two-stage training pipeline: scaling, autoencoder, class balancing in
//! code space, classifier, and model files.

pub mod audit;
pub mod checkpoint;
pub mod config;
pub mod model;
pub mod train;

pub use audit::{Access, AccessLog, Phase};
pub use checkpoint::{Checkpoint, StageSummary, TrainingMeta};
pub use config::{ArchitectureConfig, PipelineConfig, SmoteSpace, StageSpecs, TrainingConfig};
pub use model::{encode, Model};
pub use train::{
    fit, run_pipeline, train_autoencoder, train_classifier, EpochLoss, PipelineRun, Stage, StageTrace, TestReport,
    TrainTrace,
};
