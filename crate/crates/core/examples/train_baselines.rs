//! Trains baseline 1 (audio and visual only) and baseline 2 (plus the true
//! theme) on theme-flip pairs. Without the theme, flipped audio is
//! indistinguishable from the real one.

use ti_avc::data::{generate, Split, SynthConfig};
use ti_avc::eval::roc_auc;
use ti_avc::models::{ModelConfig, System, SystemKind};
use ti_avc::optim::TrainConfig;

fn main() -> ti_avc::Result<()> {
    let data = SynthConfig {
        gamma: 0.0,
        ..SynthConfig::preset("small")?
    };
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
    let labels: Vec<bool> = test.iter().map(|e| e.label).collect();

    let model =
        ModelConfig::desk(data.themes, data.frames, data.audio_dim, data.visual_dim).resolved();
    let train_config = TrainConfig {
        // The small preset leaves the initial plateau too slowly at the
        // default step of 1e-4.
        learning_rate: 1e-3,
        patience: 10,
        max_epochs: 80,
        ..TrainConfig::default()
    };
    for kind in [SystemKind::Baseline1, SystemKind::Baseline2] {
        let mut system = System::new(kind, &model, 1.0, 0)?;
        let logs = system.train(&train, &val, &train_config)?;
        let auc = roc_auc(&system.scores(&test)?, &labels)?;
        let log = &logs[0].1;
        println!(
            "{kind}: {} parameters, {} epochs (best {}), test AUC {auc:.4}",
            system.param_count(),
            log.epochs.len(),
            log.best_epoch
        );
    }
    Ok(())
}
