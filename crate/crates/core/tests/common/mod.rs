#![allow(dead_code)]

use subtyper_core::data::synthetic::gaussian_blobs;
use subtyper_core::data::Dataset;
use subtyper_core::pipeline::{ArchitectureConfig, PipelineConfig, TrainingConfig};
use subtyper_core::Rng;

/// Encoder 50→32→16→8, decoder 8→16→32→50, classifier 8→16→8→4.
pub fn desk_arch() -> ArchitectureConfig {
    ArchitectureConfig {
        encoder_widths: vec![32, 16, 8],
        decoder_widths: vec![16, 32],
        classifier_widths: vec![16, 8],
        ..Default::default()
    }
}

pub fn desk_config(input: usize, seed: u64) -> PipelineConfig {
    PipelineConfig::new(&desk_arch(), TrainingConfig::default(), input, seed).unwrap()
}

/// 400 samples, 50 features; each class has 5 marker features shifted by 5σ.
pub fn blobs(seed: u64) -> Dataset {
    gaussian_blobs([100; 4], 50, 5, 5.0, &mut Rng::new(seed)).unwrap()
}
