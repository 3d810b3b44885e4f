use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{FusionWidths, ModelConfig};
use super::input::Example;
use crate::nn::Tensor;

pub(crate) fn tiny_config() -> ModelConfig {
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
        kernel: 1,
        baseline_multiplier: Some(1.5),
    }
}

/// Random examples with alternating labels and audio lengths 2 and 3.
pub(crate) fn examples(config: &ModelConfig, n: usize, seed: u64) -> Vec<Example> {
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
