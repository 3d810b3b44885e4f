//! Joint Ti-AVC: one shared trunk trained on theme cross-entropy plus a
//! λ-weighted match loss. Compares a few values of λ.

use ti_avc::data::{generate, Split, SynthConfig};
use ti_avc::eval::roc_auc;
use ti_avc::experiment::theme_accuracy;
use ti_avc::models::{ModelConfig, System, SystemKind};
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
    let labels: Vec<bool> = test.iter().map(|e| e.label).collect();
    let model = ModelConfig::desk(data.themes, data.frames, data.audio_dim, data.visual_dim);
    let config = TrainConfig {
        // The small preset leaves the initial plateau too slowly at the
        // default step of 1e-4.
        learning_rate: 1e-3,
        patience: 10,
        max_epochs: 80,
        ..TrainConfig::default()
    };

    for lambda in [0.3, 1.0, 3.0] {
        let mut system = System::new(SystemKind::Joint, &model, lambda, 0)?;
        system.train(&train, &val, &config)?;
        let auc = roc_auc(&system.scores(&test)?, &labels)?;
        let tl = system.theme_model().expect("joint has a theme head");
        println!(
            "lambda {lambda:>3}: match AUC {auc:.4}, theme accuracy {:.3}",
            theme_accuracy(tl, &test)?
        );
    }
    Ok(())
}
