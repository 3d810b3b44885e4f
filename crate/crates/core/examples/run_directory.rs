//! The library side of the command-line workflow: generate a dataset,
//! train two systems into run directories, reload them and write the
//! evaluation, per-theme and contribution tables.

use ti_avc::data::SynthConfig;
use ti_avc::eval::Composition;
use ti_avc::experiment::{self, Run, TrainRequest};
use ti_avc::models::SystemKind;

fn main() -> ti_avc::Result<()> {
    let root = tempfile::tempdir()?;
    let data_dir = root.path().join("data");
    let dataset = experiment::generate_dataset(&SynthConfig::preset("small")?, &data_dir)?;

    let mut runs = Vec::new();
    for kind in [SystemKind::Baseline1, SystemKind::TiAvc] {
        let mut request = TrainRequest::new(kind, 0);
        request.train.learning_rate = 1e-3;
        request.train.patience = 10;
        request.train.max_epochs = 80;
        let config = request.resolve(&data_dir, &dataset)?;
        let out = root.path().join(kind.as_str());
        experiment::train(&data_dir, &dataset, &config)?.save(&out)?;
        runs.push(Run::load(&out, &dataset.manifest)?);
    }

    let reports = root.path().join("reports");
    let rows = experiment::evaluate(&data_dir, &dataset, &runs, true)?;
    experiment::write_evaluation(&reports, &rows)?;
    for r in &rows {
        println!("{:<13} {:.4}", r.system, r.auc);
    }

    let per_theme = experiment::per_theme(&data_dir, &dataset, &runs[1], Some(&runs[0]))?;
    experiment::write_per_theme_report(&reports, &per_theme)?;
    let contrib = experiment::contributions(&data_dir, &dataset, &runs[1], Composition::Positive)?;
    experiment::write_contribution_report(&reports, &contrib)?;

    let mut files: Vec<_> = std::fs::read_dir(&reports)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("reports: {}", files.join(", "));
    Ok(())
}
