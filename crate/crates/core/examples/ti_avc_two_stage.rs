//! The two-stage Ti-AVC pipeline: a theme-learning model trained on matched
//! pairs, then a correspondence model on its frozen embeddings and theme
//! distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ti_avc::data::{generate, Split, SynthConfig};
use ti_avc::eval::roc_auc;
use ti_avc::experiment::theme_accuracy;
use ti_avc::models::{ModelConfig, TiAvc};
use ti_avc::optim::TrainConfig;

fn main() -> ti_avc::Result<()> {
    let data = SynthConfig::preset("small")?;
    let dataset = generate(&data)?;
    let examples = |split| {
        let pairs = dataset.pairs(split, data.negative_mode, data.seed)?;
        dataset.examples(&pairs)
    };
    let (train, val, test) = (
        examples(Split::Train)?,
        examples(Split::Val)?,
        examples(Split::Test)?,
    );

    let model = ModelConfig::desk(data.themes, data.frames, data.audio_dim, data.visual_dim);
    let mut pipeline = TiAvc::new(&model, &mut ChaCha8Rng::seed_from_u64(0))?;
    let config = TrainConfig {
        // The small preset leaves the initial plateau too slowly at the
        // default step of 1e-4.
        learning_rate: 1e-3,
        patience: 10,
        max_epochs: 80,
        ..TrainConfig::default()
    };

    let tl_log = pipeline.train_tl(&train, &val, &config)?;
    println!(
        "stage 1: {} epochs, theme accuracy on test {:.3}",
        tl_log.epochs.len(),
        theme_accuracy(&pipeline.tl, &test)?
    );

    let cl_log = pipeline.train_cl(&train, &val, &config)?;
    let labels: Vec<bool> = test.iter().map(|e| e.label).collect();
    let auc = roc_auc(&pipeline.match_prob(&test)?, &labels)?;
    println!("stage 2: {} epochs, test AUC {auc:.4}", cl_log.epochs.len());
    Ok(())
}
