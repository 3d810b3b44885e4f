//! Which inputs the correspondence model leans on: first-layer |W·x| mass
//! per input group, for matched pairs, mismatched pairs and both.

use ti_avc::data::{generate, Split, SynthConfig};
use ti_avc::eval::{contribution, Composition};
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

    let model = ModelConfig::desk(data.themes, data.frames, data.audio_dim, data.visual_dim);
    let mut system = System::new(SystemKind::TiAvc, &model, 1.0, 0)?;
    let config = TrainConfig {
        // The small preset leaves the initial plateau too slowly at the
        // default step of 1e-4.
        learning_rate: 1e-3,
        patience: 10,
        max_epochs: 80,
        ..TrainConfig::default()
    };
    system.train(&train, &val, &config)?;

    let cl = system.cl_model().expect("ti-avc has a CL model");
    let features = system.cl_features(&test).expect("ti-avc has a TL model")?;
    for composition in [
        Composition::Positive,
        Composition::Negative,
        Composition::Both,
    ] {
        let report = contribution(cl, &features, composition)?;
        let shares: Vec<String> = report
            .groups
            .iter()
            .map(|g| format!("{} {:5.1}%", g.group.as_str(), 100.0 * g.proportion))
            .collect();
        println!(
            "{composition:<8} ({} pairs): {}",
            report.n_pairs,
            shares.join(", ")
        );
    }
    Ok(())
}
