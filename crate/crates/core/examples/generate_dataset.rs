//! Generates the small synthetic preset into a directory and reloads it.
//!
//! Usage: `cargo run --example generate_dataset -- [out_dir]`

use std::path::PathBuf;

use ti_avc::data::{load_pairs, Dataset, SynthConfig, PAIRS};
use ti_avc::experiment::generate_dataset;

fn main() -> ti_avc::Result<()> {
    let scratch = tempfile::tempdir()?;
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| scratch.path().join("small"));

    let config = SynthConfig {
        seed: 3,
        ..SynthConfig::preset("small")?
    };
    generate_dataset(&config, &out)?;

    let dataset = Dataset::load(&out)?;
    let m = &dataset.manifest;
    println!(
        "{} themes, {} frames of {}-d visual, {}-d audio",
        m.themes, m.frames, m.visual_dim, m.audio_dim
    );
    println!(
        "splits: train {}, val {}, test {}",
        m.counts.train, m.counts.val, m.counts.test
    );
    println!(
        "generator hash {}",
        m.generator_hash.as_deref().unwrap_or("-")
    );
    let pairs = load_pairs(&out.join(PAIRS))?;
    let positives = pairs.iter().filter(|p| p.is_positive()).count();
    println!("{} pairs, {positives} matched", pairs.len());
    println!("written to {}", out.display());
    Ok(())
}
