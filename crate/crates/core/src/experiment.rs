//! Reproducible experiment runs on top of the library.
//!
//! A run directory holds everything needed to score a trained system
//! again: `config.json` with the fully resolved settings, the checkpoints
//! with their sidecars and one training-log CSV per stage. Run and dataset
//! directories are assembled under a temporary name and renamed into place,
//! so a crashed command never leaves a half-written directory behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    generate, load_pairs, save_pairs, BayesOracle, Dataset, DatasetManifest, NegativeMode,
    OracleMode, PairSample, Split, SynthConfig, PAIRS,
};
use crate::error::{Error, Result};
use crate::eval::{
    contribution, pairs_auc, per_theme_auc, system_table, write_contribution, write_per_theme,
    write_table1, Composition, ContributionReport, PerThemeReport, ScoredPair, SystemRow,
    CONTRIBUTION, PER_THEME, TABLE1,
};
use crate::models::{Batch, Example, ModelConfig, System, SystemKind, TlModel};
use crate::optim::{TrainConfig, TrainingLog};

pub const RUN_CONFIG: &str = "config.json";

/// Model width presets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Internal width 128, fusion 256/256/128.
    Full,
    /// Internal width 32, fusion 64/64/32; trains in about a minute on
    /// the default synthetic dataset.
    #[default]
    Desk,
}

impl Architecture {
    pub fn model_config(self, manifest: &DatasetManifest, kernel: usize) -> ModelConfig {
        let (k, f, da, dv) = (
            manifest.themes,
            manifest.frames,
            manifest.audio_dim,
            manifest.visual_dim,
        );
        let base = match self {
            Architecture::Full => ModelConfig::full(k, f, da, dv),
            Architecture::Desk => ModelConfig::desk(k, f, da, dv),
        };
        ModelConfig { kernel, ..base }.resolved()
    }
}

/// Where the pairs of a run come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PairSource {
    /// `pairs.jsonl` in the dataset directory.
    File,
    Sampled {
        mode: NegativeMode,
        seed: u64,
    },
}

impl PairSource {
    /// Negative mode of the pairs, given the dataset they belong to.
    pub fn mode(&self, manifest: &DatasetManifest) -> NegativeMode {
        match self {
            PairSource::File => manifest.negative_mode.unwrap_or(NegativeMode::Shuffle),
            PairSource::Sampled { mode, .. } => *mode,
        }
    }

    /// The file when present and no other mode is requested, otherwise
    /// fresh pairs seeded by the generator seed.
    pub fn choose(dir: &Path, dataset: &Dataset, mode: Option<NegativeMode>) -> Self {
        let declared = dataset.manifest.negative_mode;
        let file = dir.join(PAIRS).exists();
        match mode {
            None if file => PairSource::File,
            Some(m) if file && declared == Some(m) => PairSource::File,
            _ => PairSource::Sampled {
                mode: mode.or(declared).unwrap_or(NegativeMode::Shuffle),
                seed: pair_seed(dataset),
            },
        }
    }

    pub fn pairs(&self, dir: &Path, dataset: &Dataset, split: Split) -> Result<Vec<PairSample>> {
        match self {
            PairSource::File => {
                let all = load_pairs(&dir.join(PAIRS))?;
                let splits: BTreeMap<&str, Split> = dataset
                    .records
                    .iter()
                    .map(|r| (r.id.as_str(), r.split))
                    .collect();
                let mut out = Vec::new();
                for p in all {
                    let s = splits.get(p.visual_id.as_str()).ok_or_else(|| {
                        Error::Dataset(format!(
                            "{PAIRS} references unknown record `{}`",
                            p.visual_id
                        ))
                    })?;
                    if *s == split {
                        out.push(p);
                    }
                }
                Ok(out)
            }
            PairSource::Sampled { mode, seed } => dataset.pairs(split, *mode, *seed),
        }
    }

    pub fn examples(&self, dir: &Path, dataset: &Dataset, split: Split) -> Result<Vec<Example>> {
        dataset.examples(&self.pairs(dir, dataset, split)?)
    }
}

fn pair_seed(dataset: &Dataset) -> u64 {
    dataset.manifest.generator.as_ref().map_or(0, |g| g.seed)
}

/// Everything that determines a trained run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemKind,
    pub dataset: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_hash: Option<String>,
    pub pairs: PairSource,
    /// Seeds weight initialization and batch order.
    pub seed: u64,
    pub architecture: Architecture,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Command-line level choices for one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRequest {
    pub system: SystemKind,
    pub seed: u64,
    pub train: TrainConfig,
    pub architecture: Architecture,
    pub kernel: usize,
    /// Overrides the negative mode of the dataset.
    pub negative_mode: Option<NegativeMode>,
}

impl TrainRequest {
    pub fn new(system: SystemKind, seed: u64) -> Self {
        Self {
            system,
            seed,
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            architecture: Architecture::default(),
            kernel: 1,
            negative_mode: None,
        }
    }

    pub fn resolve(&self, dataset_dir: &Path, dataset: &Dataset) -> Result<RunConfig> {
        self.train.validate()?;
        let model = self
            .architecture
            .model_config(&dataset.manifest, self.kernel);
        model.validate()?;
        Ok(RunConfig {
            system: self.system,
            dataset: dataset_dir.to_path_buf(),
            generator_hash: dataset.manifest.generator_hash.clone(),
            pairs: PairSource::choose(dataset_dir, dataset, self.negative_mode),
            seed: self.seed,
            architecture: self.architecture,
            model,
            train: TrainConfig {
                seed: self.seed,
                ..self.train.clone()
            },
        })
    }
}

/// A trained system together with the settings that produced it.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: RunConfig,
    pub system: System,
    pub logs: Vec<(&'static str, TrainingLog)>,
}

/// Trains `config.system` on the train split, stopping on the val split.
pub fn train(dataset_dir: &Path, dataset: &Dataset, config: &RunConfig) -> Result<Run> {
    let train = config.pairs.examples(dataset_dir, dataset, Split::Train)?;
    let val = config.pairs.examples(dataset_dir, dataset, Split::Val)?;
    let mut system = System::new(
        config.system,
        &config.model,
        config.train.joint_lambda,
        config.seed,
    )?;
    let logs = system.train(&train, &val, &config.train)?;
    Ok(Run {
        config: config.clone(),
        system,
        logs,
    })
}

fn log_name(stage: &str) -> String {
    match stage {
        "model" => "train_log.csv".to_string(),
        other => format!("train_log_{other}.csv"),
    }
}

/// Builds a directory under a temporary name next to `out` and renames it
/// into place once `fill` succeeds. `out` may exist only as an empty
/// directory.
pub fn write_atomically(out: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let empty_dir = out.is_dir() && fs::read_dir(out)?.next().is_none();
    if out.exists() && !empty_dir {
        return Err(Error::Config(format!(
            "{} already exists and is not empty; choose a new output directory",
            out.display()
        )));
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new()
        .prefix(".ti-avc-")
        .tempdir_in(&parent)?;
    fill(staging.path())?;
    let kept = staging.keep();
    if empty_dir {
        fs::remove_dir(out)?;
    }
    fs::rename(&kept, out).inspect_err(|_| {
        let _ = fs::remove_dir_all(&kept);
    })?;
    Ok(())
}

impl Run {
    pub fn save(&self, out: &Path) -> Result<()> {
        write_atomically(out, |dir| {
            let json = serde_json::to_string_pretty(&self.config)?;
            fs::write(dir.join(RUN_CONFIG), json + "\n")?;
            self.system.save(dir, &self.config.model)?;
            for (stage, log) in &self.logs {
                log.save_csv(&dir.join(log_name(stage)))?;
            }
            Ok(())
        })
    }

    /// Loads a run directory and checks it against the dataset it will be
    /// evaluated on.
    pub fn load(dir: &Path, manifest: &DatasetManifest) -> Result<Self> {
        let path = dir.join(RUN_CONFIG);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let (system, model) = System::load(dir)?;
        if system.kind() != config.system || model != config.model {
            return Err(Error::Checkpoint {
                path: dir.to_path_buf(),
                detail: "checkpoint sidecar disagrees with config.json".into(),
            });
        }
        check_dims(&model, manifest, dir)?;
        Ok(Self {
            config,
            system,
            logs: Vec::new(),
        })
    }

    pub fn name(&self) -> &'static str {
        self.config.system.as_str()
    }

    /// Scores the test pairs of `dataset`.
    pub fn score(&self, dataset_dir: &Path, dataset: &Dataset) -> Result<Vec<ScoredPair>> {
        let examples = self
            .config
            .pairs
            .examples(dataset_dir, dataset, Split::Test)?;
        let scores = self.system.scores(&examples)?;
        Ok(scored(&examples, &scores, self.name()))
    }
}

fn scored(examples: &[Example], scores: &[f64], system: &str) -> Vec<ScoredPair> {
    examples
        .iter()
        .zip(scores)
        .map(|(e, &score)| ScoredPair {
            score,
            label: e.label,
            theme_true: e.theme,
            system: system.to_string(),
        })
        .collect()
}

fn check_dims(model: &ModelConfig, manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    let pairs = [
        ("themes", model.themes, manifest.themes),
        ("frames", model.frames, manifest.frames),
        ("audio_dim", model.audio_dim, manifest.audio_dim),
        ("visual_dim", model.visual_dim, manifest.visual_dim),
    ];
    for (name, ours, theirs) in pairs {
        if ours != theirs {
            return Err(Error::Config(format!(
                "{}: checkpoint has {name} = {ours}, dataset manifest has {theirs}",
                dir.display()
            )));
        }
    }
    Ok(())
}

/// Generates a synthetic dataset with its pair file into `out`.
pub fn generate_dataset(config: &SynthConfig, out: &Path) -> Result<Dataset> {
    let dataset = generate(config)?;
    write_atomically(out, |dir| {
        dataset.save(dir)?;
        let mut pairs = Vec::new();
        for split in Split::ALL {
            pairs.extend(dataset.pairs(split, config.negative_mode, config.seed)?);
        }
        save_pairs(&dir.join(PAIRS), &pairs)
    })?;
    Ok(dataset)
}

/// Fraction of matched test pairs whose most probable theme is the true one.
pub fn theme_accuracy(tl: &TlModel<f32>, examples: &[Example]) -> Result<f64> {
    let positives: Vec<&Example> = examples.iter().filter(|e| e.label).collect();
    if positives.is_empty() {
        return Err(Error::Evaluation("no matched pairs to classify".into()));
    }
    let k = tl.themes();
    let mut correct = 0;
    for chunk in positives.chunks(64) {
        let probs = tl.predict(&Batch::<f32>::new(chunk)?)?;
        for (row, e) in probs.data().chunks(k).zip(chunk) {
            let best = (0..k)
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .expect("at least one theme");
            correct += usize::from(best == e.theme);
        }
    }
    Ok(correct as f64 / positives.len() as f64)
}

/// Scores of the Bayes oracle on the test pairs of a synthetic dataset.
pub fn oracle_scores(
    dataset_dir: &Path,
    dataset: &Dataset,
    pairs: &PairSource,
    mode: OracleMode,
) -> Result<Vec<ScoredPair>> {
    let generator = dataset.manifest.generator.as_ref().ok_or_else(|| {
        Error::Config("the oracle needs a synthetic dataset with a generator config".into())
    })?;
    let config = SynthConfig {
        negative_mode: pairs.mode(&dataset.manifest),
        ..generator.clone()
    };
    let oracle = BayesOracle::new(&config)?;
    let examples = pairs.examples(dataset_dir, dataset, Split::Test)?;
    let scores = oracle.score_examples(&examples, mode)?;
    let name = match mode {
        OracleMode::Aware => "oracle-aware",
        OracleMode::Blind => "oracle-blind",
    };
    Ok(scored(&examples, &scores, name))
}

/// Table rows for the given runs, replicates of one system averaged, in
/// the canonical system order. Oracle rows follow when requested.
pub fn evaluate(
    dataset_dir: &Path,
    dataset: &Dataset,
    runs: &[Run],
    with_oracle: bool,
) -> Result<Vec<SystemRow>> {
    let mut by_system: BTreeMap<SystemKind, Vec<f64>> = BTreeMap::new();
    for run in runs {
        let auc = pairs_auc(&run.score(dataset_dir, dataset)?)?;
        by_system.entry(run.config.system).or_default().push(auc);
    }
    let mut aucs: Vec<(String, f64)> = by_system
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    if with_oracle {
        let source = runs.first().map_or_else(
            || PairSource::choose(dataset_dir, dataset, None),
            |r| r.config.pairs.clone(),
        );
        for mode in [OracleMode::Aware, OracleMode::Blind] {
            let pairs = oracle_scores(dataset_dir, dataset, &source, mode)?;
            aucs.push((pairs[0].system.clone(), pairs_auc(&pairs)?));
        }
    }
    Ok(system_table(&aucs))
}

/// Writes `table1.csv` into `out`.
pub fn write_evaluation(out: &Path, rows: &[SystemRow]) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(TABLE1);
    write_table1(&path, rows)?;
    Ok(path)
}

/// Per-theme AUC of `run`, with the pooled AUC of `baseline` as reference.
pub fn per_theme(
    dataset_dir: &Path,
    dataset: &Dataset,
    run: &Run,
    baseline: Option<&Run>,
) -> Result<PerThemeReport> {
    let mut report = per_theme_auc(&run.score(dataset_dir, dataset)?);
    if let Some(b) = baseline {
        report.baseline1_auc = Some(pairs_auc(&b.score(dataset_dir, dataset)?)?);
    }
    Ok(report)
}

pub fn write_per_theme_report(out: &Path, report: &PerThemeReport) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(PER_THEME);
    write_per_theme(&path, report)?;
    Ok(path)
}

/// First-layer contribution of the CL model of `run` on the test pairs.
pub fn contributions(
    dataset_dir: &Path,
    dataset: &Dataset,
    run: &Run,
    composition: Composition,
) -> Result<ContributionReport> {
    let examples = run
        .config
        .pairs
        .examples(dataset_dir, dataset, Split::Test)?;
    let cl = run.system.cl_model().ok_or_else(|| {
        Error::Config(format!(
            "{} has no CL model; contribution analysis needs ti-avc or joint",
            run.name()
        ))
    })?;
    let features = run
        .system
        .cl_features(&examples)
        .expect("systems with a CL model have a TL model")?;
    contribution(cl, &features, composition)
}

pub fn write_contribution_report(out: &Path, report: &ContributionReport) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(CONTRIBUTION);
    write_contribution(&path, report)?;
    Ok(path)
}
