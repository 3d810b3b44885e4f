//! Synthetic datasets in which audio-visual correspondence depends on the
//! theme.
//!
//! Each record draws a theme `t` and a latent `z ~ N(0, I_d)`. Visual frames
//! are `P z + γ μ_t + ε` and audio steps are `c_t Q z + η`, where `P` and `Q`
//! have orthonormal columns and `c_t = ±1` splits the themes into two equal
//! halves. The same latent content therefore appears with opposite sign in
//! the audio of the two theme halves, and only a model that knows the theme
//! can tell a matched pair from its theme-flipped counterpart.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::format::{AudioSteps, Dataset, DatasetManifest, EmbeddingRecord, NegativeMode, Split};
use super::split::{split_dataset, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub themes: usize,
    pub latent_dim: usize,
    pub visual_dim: usize,
    pub audio_dim: usize,
    pub frames: usize,
    pub audio_steps: usize,
    /// Scale of the theme cue added to every visual frame.
    pub gamma: f64,
    pub sigma_v: f64,
    pub sigma_a: f64,
    /// Norm scale of the theme means.
    pub theme_mean_scale: f64,
    /// Relative distance between the means of themes `t` and `t + K/2`.
    pub theme_pair_offset: f64,
    pub negative_mode: NegativeMode,
    pub records: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            themes: 6,
            latent_dim: 16,
            visual_dim: 64,
            audio_dim: 32,
            frames: 8,
            audio_steps: 24,
            gamma: 0.5,
            sigma_v: 0.3,
            sigma_a: 0.3,
            theme_mean_scale: 1.5,
            theme_pair_offset: 0.3,
            negative_mode: NegativeMode::ThemeFlip,
            records: 2400,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Named presets: `default` (2,400 records) and `small` (600 records).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "small" => Ok(Self {
                records: 600,
                ..Self::default()
            }),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected default or small)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.themes < 2 || !self.themes.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "theme count must be even and at least 2 so that signs balance, got {}",
                self.themes
            )));
        }
        let dims = [
            ("latent_dim", self.latent_dim),
            ("frames", self.frames),
            ("audio_steps", self.audio_steps),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.visual_dim < self.latent_dim || self.audio_dim < self.latent_dim {
            return Err(Error::Config(
                "visual and audio dims must be at least the latent dim".into(),
            ));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("sigma_v", self.sigma_v),
            ("sigma_a", self.sigma_a),
            ("theme_mean_scale", self.theme_mean_scale),
            ("theme_pair_offset", self.theme_pair_offset),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the JSON form of this configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// `c_t`: +1 for the first half of the themes, −1 for the second.
    pub fn sign(&self, theme: usize) -> f64 {
        if theme < self.themes / 2 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Deterministic generator stream for item `index` of a named domain.
pub(crate) fn item_rng(domain: &str, seed: u64, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update(seed.to_le_bytes());
    h.update(index.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Projections and theme means shared by every record of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    /// `D_v × d`, orthonormal columns.
    pub p: DMatrix<f64>,
    /// `D_a × d`, orthonormal columns.
    pub q: DMatrix<f64>,
    /// One `D_v` mean per theme, orthogonal to the columns of `P`.
    pub means: Vec<DVector<f64>>,
}

/// One record drawn from the generator, before rounding to `f32`.
#[derive(Clone, Debug)]
pub struct SynthSample {
    pub theme: usize,
    pub latent: DVector<f64>,
    /// `F × D_v`
    pub visual: DMatrix<f64>,
    /// `T_a × D_a`
    pub audio: DMatrix<f64>,
    /// Same latent with the sign inverted; drawn in theme-flip mode only.
    pub audio_flip: Option<DMatrix<f64>>,
}

impl GeneratorParams {
    pub fn new(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let rng = &mut item_rng("params", config.seed, 0);
        let d = config.latent_dim;
        let p = gaussian_matrix(rng, config.visual_dim, d).qr().q();
        let q = gaussian_matrix(rng, config.audio_dim, d).qr().q();
        let half = config.themes / 2;
        let unit = config.theme_mean_scale / (config.visual_dim as f64).sqrt();
        let mut means: Vec<DVector<f64>> = (0..half)
            .map(|_| gaussian_vector(rng, config.visual_dim) * unit)
            .collect();
        for t in 0..half {
            let offset =
                gaussian_vector(rng, config.visual_dim) * (unit * config.theme_pair_offset);
            means.push(&means[t] + offset);
        }
        for mu in &mut means {
            let inside = &p * (p.transpose() * &*mu);
            *mu -= inside;
        }
        Ok(Self { p, q, means })
    }

    pub fn sample(&self, config: &SynthConfig, rng: &mut ChaCha8Rng) -> SynthSample {
        let theme = rng.random_range(0..config.themes);
        let latent = gaussian_vector(rng, config.latent_dim);
        let pz = &self.p * &latent;
        let cue = &self.means[theme] * config.gamma;
        let visual = DMatrix::from_fn(config.frames, config.visual_dim, |_, j| {
            let e: f64 = rng.sample(StandardNormal);
            pz[j] + cue[j] + config.sigma_v * e
        });
        let qz = &self.q * &latent;
        let mut audio_for = |sign: f64| {
            DMatrix::from_fn(config.audio_steps, config.audio_dim, |_, j| {
                let e: f64 = rng.sample(StandardNormal);
                sign * qz[j] + config.sigma_a * e
            })
        };
        let c = config.sign(theme);
        let audio = audio_for(c);
        let audio_flip = match config.negative_mode {
            NegativeMode::ThemeFlip => Some(audio_for(-c)),
            NegativeMode::Shuffle => None,
        };
        SynthSample {
            theme,
            latent,
            visual,
            audio,
            audio_flip,
        }
    }
}

fn to_tensor(m: &DMatrix<f64>) -> Arc<Tensor<f32>> {
    let (rows, cols) = m.shape();
    Arc::new(Tensor::from_fn(&[rows, cols], |i| {
        m[(i / cols, i % cols)] as f32
    }))
}

/// Generates, splits and validates a full dataset.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    let params = GeneratorParams::new(config)?;
    let mut records: Vec<EmbeddingRecord> = (0..config.records)
        .into_par_iter()
        .map(|i| {
            let s = params.sample(config, &mut item_rng("record", config.seed, i as u64));
            EmbeddingRecord {
                id: format!("s{i:06}"),
                theme_id: s.theme,
                split: Split::Train,
                audio: to_tensor(&s.audio),
                visual: to_tensor(&s.visual),
                audio_flip: s.audio_flip.as_ref().map(to_tensor),
            }
        })
        .collect();
    let counts = split_dataset(&mut records, DEFAULT_FRACTIONS, config.seed)?;
    let manifest = DatasetManifest {
        themes: config.themes,
        frames: config.frames,
        audio_dim: config.audio_dim,
        visual_dim: config.visual_dim,
        audio_steps: AudioSteps::Fixed(config.audio_steps),
        counts,
        negative_mode: Some(config.negative_mode),
        generator_hash: Some(config.hash()),
        generator: Some(config.clone()),
        theme_names: None,
        extra: BTreeMap::new(),
    };
    let dataset = Dataset { manifest, records };
    dataset.validate()?;
    Ok(dataset)
}
