use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::BaselineModel;
use super::cl::ClExample;
use super::cl::ClModel;
use super::config::ModelConfig;
use super::input::{Batch, Example};
use super::joint::JointModel;
use super::ti_avc::{extract_features, TiAvc, SCORE_CHUNK};
use super::tl::TlModel;
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Params, Scalar};
use crate::optim::{fit, TrainConfig, TrainingLog};

/// The four compared systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SystemKind {
    #[serde(rename = "baseline1")]
    Baseline1,
    #[serde(rename = "baseline2")]
    Baseline2,
    #[serde(rename = "ti-avc")]
    TiAvc,
    #[serde(rename = "joint")]
    Joint,
}

impl SystemKind {
    pub const ALL: [SystemKind; 4] = [
        SystemKind::Baseline1,
        SystemKind::Baseline2,
        SystemKind::TiAvc,
        SystemKind::Joint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Baseline1 => "baseline1",
            SystemKind::Baseline2 => "baseline2",
            SystemKind::TiAvc => "ti-avc",
            SystemKind::Joint => "joint",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownSystem(s.to_string()))
    }
}

/// JSON written next to every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub system: SystemKind,
    /// `model` for single-network systems, `tl` or `cl` for Ti-AVC.
    pub role: String,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

/// A trainable and scorable instance of one of the four systems.
#[derive(Clone, Debug, PartialEq)]
pub enum System {
    Baseline(BaselineModel<f32>),
    TiAvc(TiAvc),
    Joint(JointModel<f32>),
}

impl System {
    /// Builds an untrained system with weights drawn from `seed`.
    pub fn new(kind: SystemKind, config: &ModelConfig, lambda: f64, seed: u64) -> Result<Self> {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        Ok(match kind {
            SystemKind::Baseline1 => System::Baseline(BaselineModel::new(config, 1, rng)?),
            SystemKind::Baseline2 => System::Baseline(BaselineModel::new(config, 2, rng)?),
            SystemKind::TiAvc => System::TiAvc(TiAvc::new(config, rng)?),
            SystemKind::Joint => System::Joint(JointModel::new(config, lambda, rng)?),
        })
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            System::Baseline(b) if b.variant() == 1 => SystemKind::Baseline1,
            System::Baseline(_) => SystemKind::Baseline2,
            System::TiAvc(_) => SystemKind::TiAvc,
            System::Joint(_) => SystemKind::Joint,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            System::Baseline(m) => m.param_count(),
            System::TiAvc(p) => p.tl.param_count() + p.cl.param_count(),
            System::Joint(m) => m.param_count(),
        }
    }

    /// Trains every stage of the system; returns one named log per stage.
    pub fn train(
        &mut self,
        train: &[Example],
        val: &[Example],
        config: &TrainConfig,
    ) -> Result<Vec<(&'static str, TrainingLog)>> {
        Ok(match self {
            System::Baseline(m) => vec![("model", fit(m, train, val, config)?)],
            System::TiAvc(p) => {
                let tl = p.train_tl(train, val, config)?;
                let cl = p.train_cl(train, val, config)?;
                vec![("tl", tl), ("cl", cl)]
            }
            System::Joint(m) => vec![("model", fit(m, train, val, config)?)],
        })
    }

    /// Match probabilities in input order.
    pub fn scores(&self, examples: &[Example]) -> Result<Vec<f64>> {
        match self {
            System::Baseline(m) => score_batches(examples, |b| m.match_prob(b)),
            System::TiAvc(p) => p.match_prob(examples),
            System::Joint(m) => score_batches(examples, |b| m.match_prob(b)),
        }
    }

    /// The TL model whose theme predictions the system exposes, if any.
    pub fn theme_model(&self) -> Option<&TlModel<f32>> {
        match self {
            System::Baseline(_) => None,
            System::TiAvc(p) => Some(&p.tl),
            System::Joint(m) => Some(&m.tl),
        }
    }

    /// The CL model whose first layer the contribution analysis reads.
    pub fn cl_model(&self) -> Option<&ClModel<f32>> {
        match self {
            System::Baseline(_) => None,
            System::TiAvc(p) => Some(&p.cl),
            System::Joint(m) => Some(&m.cl),
        }
    }

    /// CL inputs for `examples`, computed by the system's own TL model.
    pub fn cl_features(&self, examples: &[Example]) -> Option<Result<Vec<ClExample>>> {
        self.theme_model().map(|tl| extract_features(tl, examples))
    }

    /// Checkpoint stems written by [`save`](Self::save).
    pub fn roles(kind: SystemKind) -> &'static [&'static str] {
        match kind {
            SystemKind::TiAvc => &["tl", "cl"],
            _ => &["model"],
        }
    }

    /// Writes `<role>.avck` and `<role>.json` for every role into `dir`.
    pub fn save(&self, dir: &Path, config: &ModelConfig) -> Result<()> {
        let kind = self.kind();
        let sidecar = |role: &str, lambda: Option<f64>| Sidecar {
            system: kind,
            role: role.to_string(),
            model: config.resolved(),
            lambda,
        };
        let write = |role: &str, lambda: Option<f64>, save: &dyn Fn(&Path) -> Result<()>| {
            save(&dir.join(format!("{role}.{}", checkpoint::EXTENSION)))?;
            let json = serde_json::to_string_pretty(&sidecar(role, lambda))?;
            fs::write(dir.join(format!("{role}.json")), json + "\n")?;
            Ok::<_, Error>(())
        };
        match self {
            System::Baseline(m) => write("model", None, &|p| checkpoint::save(p, m)),
            System::TiAvc(p) => {
                write("tl", None, &|path| checkpoint::save(path, &p.tl))?;
                write("cl", None, &|path| checkpoint::save(path, &p.cl))
            }
            System::Joint(m) => write("model", Some(m.lambda), &|p| checkpoint::save(p, m)),
        }
    }

    /// Loads a system saved by [`save`](Self::save).
    pub fn load(dir: &Path) -> Result<(System, ModelConfig)> {
        let first = ["model", "tl"]
            .iter()
            .map(|r| dir.join(format!("{r}.json")))
            .find(|p| p.exists())
            .ok_or_else(|| Error::Checkpoint {
                path: dir.to_path_buf(),
                detail: "no model.json or tl.json sidecar".into(),
            })?;
        let sidecar: Sidecar = read_sidecar(&first)?;
        let config = sidecar.model.clone();
        let mut system = System::new(sidecar.system, &config, sidecar.lambda.unwrap_or(1.0), 0)?;
        let ck = |role: &str| dir.join(format!("{role}.{}", checkpoint::EXTENSION));
        match &mut system {
            System::Baseline(m) => checkpoint::load_into(&ck("model"), m)?,
            System::Joint(m) => checkpoint::load_into(&ck("model"), m)?,
            System::TiAvc(p) => {
                let cl_side = read_sidecar(&dir.join("cl.json"))?;
                if cl_side.model != config {
                    return Err(Error::Checkpoint {
                        path: dir.join("cl.json"),
                        detail: "CL model config differs from the TL sidecar".into(),
                    });
                }
                let mut tl = p.tl.clone();
                let mut cl = p.cl.clone();
                checkpoint::load_into(&ck("tl"), &mut tl)?;
                checkpoint::load_into(&ck("cl"), &mut cl)?;
                *p = TiAvc::with_trained_tl(tl, cl);
            }
        }
        Ok((system, config))
    }
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        detail: format!("invalid sidecar: {e}"),
    })
}

/// Scores fixed-size chunks in parallel and concatenates them in order.
fn score_batches<T: Scalar>(
    examples: &[Example],
    score: impl Fn(&Batch<T>) -> Result<Vec<T>> + Sync,
) -> Result<Vec<f64>> {
    let chunks: Vec<Result<Vec<f64>>> = examples
        .par_chunks(SCORE_CHUNK)
        .map(|chunk| {
            let refs: Vec<&Example> = chunk.iter().collect();
            let probs = score(&Batch::new(&refs)?)?;
            Ok(probs.into_iter().map(|p| p.to_f64_lossy()).collect())
        })
        .collect();
    let mut out = Vec::with_capacity(examples.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}
