//! On-disk dataset layout: `manifest.json`, `records.jsonl` and the
//! optional `pairs.jsonl`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::synth::SynthConfig;
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const MANIFEST: &str = "manifest.json";
pub const RECORDS: &str = "records.jsonl";
pub const PAIRS: &str = "pairs.jsonl";

/// Suffix marking the theme-flipped audio of a record in pair audio ids.
pub const FLIP_SUFFIX: &str = "#flip";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How negatives are formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeMode {
    /// Audio of a different record in the same split.
    Shuffle,
    /// The record's own content with the theme relation inverted.
    #[default]
    ThemeFlip,
}

impl fmt::Display for NegativeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeMode::Shuffle => "shuffle",
            NegativeMode::ThemeFlip => "theme-flip",
        })
    }
}

impl FromStr for NegativeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffle" => Ok(NegativeMode::Shuffle),
            "theme-flip" => Ok(NegativeMode::ThemeFlip),
            other => Err(Error::Config(format!(
                "negative mode must be shuffle or theme-flip, got `{other}`"
            ))),
        }
    }
}

/// Audio sequence length policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioSteps {
    Fixed(usize),
    Variable,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut usize {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub themes: usize,
    pub frames: usize,
    pub audio_dim: usize,
    pub visual_dim: usize,
    pub audio_steps: AudioSteps,
    pub counts: SplitCounts,
    /// Set when records carry theme-flipped audio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_mode: Option<NegativeMode>,
    /// SHA-256 of the generator configuration, for synthetic datasets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SynthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theme_names: Option<Vec<String>>,
    /// Producer-specific metadata, kept verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.themes < 2 {
            return Err(Error::Dataset(format!(
                "manifest has {} themes, need at least 2",
                self.themes
            )));
        }
        for (name, v) in [
            ("frames", self.frames),
            ("audio_dim", self.audio_dim),
            ("visual_dim", self.visual_dim),
        ] {
            if v == 0 {
                return Err(Error::Dataset(format!(
                    "manifest field `{name}` must be positive"
                )));
            }
        }
        if self.audio_steps == AudioSteps::Fixed(0) {
            return Err(Error::Dataset("fixed audio length must be positive".into()));
        }
        if let Some(names) = &self.theme_names {
            if names.len() != self.themes {
                return Err(Error::Dataset(format!(
                    "{} theme names for {} themes",
                    names.len(),
                    self.themes
                )));
            }
        }
        Ok(())
    }
}

/// One video: theme, split and both embedding streams.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub theme_id: usize,
    pub split: Split,
    /// `[T_a, D_a]`
    pub audio: Arc<Tensor<f32>>,
    /// `[F, D_v]`
    pub visual: Arc<Tensor<f32>>,
    /// Theme-flipped audio for hard-mode negatives, same shape as `audio`.
    pub audio_flip: Option<Arc<Tensor<f32>>>,
}

impl EmbeddingRecord {
    pub fn validate(&self, manifest: &DatasetManifest) -> Result<()> {
        let bad = |field: &str, detail: String| Err(Error::record(&self.id, field, detail));
        if self.id.is_empty() || self.id.ends_with(FLIP_SUFFIX) {
            return bad(
                "id",
                format!("ids must be non-empty and not end in `{FLIP_SUFFIX}`"),
            );
        }
        if self.theme_id >= manifest.themes {
            return bad(
                "theme_id",
                format!(
                    "{} is out of range for {} themes",
                    self.theme_id, manifest.themes
                ),
            );
        }
        if self.visual.shape() != [manifest.frames, manifest.visual_dim] {
            return bad(
                "visual",
                format!(
                    "shape {:?}, manifest expects [{}, {}]",
                    self.visual.shape(),
                    manifest.frames,
                    manifest.visual_dim
                ),
            );
        }
        let audio_ok = self.audio.rank() == 2
            && self.audio.dim(1) == manifest.audio_dim
            && self.audio.dim(0) > 0
            && match manifest.audio_steps {
                AudioSteps::Fixed(t) => self.audio.dim(0) == t,
                AudioSteps::Variable => true,
            };
        if !audio_ok {
            return bad(
                "audio",
                format!(
                    "shape {:?}, manifest expects [{:?}, {}]",
                    self.audio.shape(),
                    manifest.audio_steps,
                    manifest.audio_dim
                ),
            );
        }
        if let Some(flip) = &self.audio_flip {
            if flip.shape() != self.audio.shape() {
                return bad(
                    "audio_flip",
                    format!("shape {:?} differs from audio", flip.shape()),
                );
            }
            if !flip.is_finite() {
                return bad("audio_flip", "non-finite value".into());
            }
        }
        if !self.audio.is_finite() {
            return bad("audio", "non-finite value".into());
        }
        if !self.visual.is_finite() {
            return bad("visual", "non-finite value".into());
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    theme_id: usize,
    split: Split,
    audio: Vec<Vec<f32>>,
    visual: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio_flip: Option<Vec<Vec<f32>>>,
}

fn to_rows(t: &Tensor<f32>) -> Vec<Vec<f32>> {
    let cols = t.dim(1);
    t.data().chunks(cols.max(1)).map(<[f32]>::to_vec).collect()
}

fn from_rows(id: &str, field: &str, rows: Vec<Vec<f32>>) -> Result<Tensor<f32>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::record(id, field, "rows have different lengths"));
    }
    let n = rows.len();
    Tensor::new(vec![n, cols], rows.into_iter().flatten().collect())
}

impl RecordLine {
    fn from_record(r: &EmbeddingRecord) -> Self {
        Self {
            id: r.id.clone(),
            theme_id: r.theme_id,
            split: r.split,
            audio: to_rows(&r.audio),
            visual: to_rows(&r.visual),
            audio_flip: r.audio_flip.as_deref().map(to_rows),
        }
    }

    fn into_record(self) -> Result<EmbeddingRecord> {
        let audio = from_rows(&self.id, "audio", self.audio)?;
        let visual = from_rows(&self.id, "visual", self.visual)?;
        let audio_flip = match self.audio_flip {
            Some(rows) => Some(Arc::new(from_rows(&self.id, "audio_flip", rows)?)),
            None => None,
        };
        Ok(EmbeddingRecord {
            id: self.id,
            theme_id: self.theme_id,
            split: self.split,
            audio: Arc::new(audio),
            visual: Arc::new(visual),
            audio_flip,
        })
    }
}

/// A precomputed pair, as stored in `pairs.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub visual_id: String,
    pub audio_id: String,
    /// 1 matched, 0 mismatched.
    pub label: u8,
    /// Theme of the visual-side record.
    pub theme_true: usize,
}

impl PairSample {
    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// Manifest plus records, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub records: Vec<EmbeddingRecord>,
}

impl Dataset {
    /// Checks every record against the manifest, id uniqueness and the
    /// per-split counts.
    pub fn validate(&self) -> Result<()> {
        self.manifest.validate()?;
        let mut seen = HashSet::with_capacity(self.records.len());
        let mut counts = SplitCounts::default();
        for r in &self.records {
            r.validate(&self.manifest)?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::record(&r.id, "id", "duplicate id"));
            }
            if self.manifest.negative_mode == Some(NegativeMode::ThemeFlip)
                && r.audio_flip.is_none()
            {
                return Err(Error::record(
                    &r.id,
                    "audio_flip",
                    "missing, but the manifest declares theme-flip negatives",
                ));
            }
            *counts.get_mut(r.split) += 1;
        }
        if counts != self.manifest.counts {
            return Err(Error::Dataset(format!(
                "manifest counts {:?} do not match records {:?}",
                self.manifest.counts, counts
            )));
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> Vec<&EmbeddingRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir)?;
        let manifest = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(dir.join(MANIFEST), manifest + "\n")?;
        let mut out = BufWriter::new(fs::File::create(dir.join(RECORDS))?);
        for r in &self.records {
            serde_json::to_writer(&mut out, &RecordLine::from_record(r))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", manifest_path.display())))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Dataset(format!("{}: {e}", manifest_path.display())))?;
        let records_path = dir.join(RECORDS);
        let file = fs::File::open(&records_path)
            .map_err(|e| Error::Dataset(format!("cannot read {}: {e}", records_path.display())))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine = serde_json::from_str(&line)
                .map_err(|e| Error::Dataset(format!("{RECORDS} line {}: {e}", n + 1)))?;
            records.push(parsed.into_record()?);
        }
        let dataset = Dataset { manifest, records };
        dataset.validate()?;
        Ok(dataset)
    }
}

pub fn save_pairs(path: &Path, pairs: &[PairSample]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_pairs(path: &Path) -> Result<Vec<PairSample>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::Dataset(format!("{} line {}: {e}", path.display(), n + 1)))
        })
        .collect()
}
