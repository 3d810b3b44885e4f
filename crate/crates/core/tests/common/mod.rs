#![allow(dead_code)]

pub mod gradients;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ti_avc::models::{Example, FusionWidths, ModelConfig};
use ti_avc::nn::Tensor;

/// A model small enough for exhaustive finite differences.
pub fn tiny_config(kernel: usize) -> ModelConfig {
    ModelConfig {
        themes: 3,
        frames: 3,
        audio_dim: 3,
        visual_dim: 4,
        width: 3,
        fusion: FusionWidths {
            conv1: 4,
            conv2: 4,
            dense: 3,
        },
        kernel,
        baseline_multiplier: Some(1.5),
    }
}

/// Random pairs with alternating labels and audio lengths 2 and 3.
pub fn examples(config: &ModelConfig, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut r =
                |shape: &[usize]| Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0f32));
            Example {
                visual: Arc::new(r(&[config.frames, config.visual_dim])),
                audio: Arc::new(r(&[2 + i % 2, config.audio_dim])),
                theme: i % config.themes,
                label: i % 2 == 0,
            }
        })
        .collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}
