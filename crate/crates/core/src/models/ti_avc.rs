use rand::Rng;
use rayon::prelude::*;

use super::cl::{ClBatch, ClExample, ClModel};
use super::config::ModelConfig;
use super::input::{Batch, Example};
use super::tl::TlModel;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, Tensor};
use crate::optim::{fit, TrainConfig, TrainingLog};

pub(crate) const SCORE_CHUNK: usize = 64;

/// The two-stage system: a TL model trained on themes, then frozen as an
/// embedding extractor for the CL model.
#[derive(Clone, Debug, PartialEq)]
pub struct TiAvc {
    pub tl: TlModel<f32>,
    pub cl: ClModel<f32>,
    tl_trained: bool,
}

/// Runs `tl` over `examples` and keeps what a CL model reads: frame
/// embeddings, the audio embedding and the predicted theme distribution.
pub fn extract_features(tl: &TlModel<f32>, examples: &[Example]) -> Result<Vec<ClExample>> {
    let chunks: Vec<Result<Vec<ClExample>>> = examples
        .par_chunks(SCORE_CHUNK)
        .map(|chunk| {
            let refs: Vec<&Example> = chunk.iter().collect();
            let batch = Batch::<f32>::new(&refs)?;
            let (out, _) = tl.forward(&batch)?;
            let (w, f) = (tl.width(), tl.frames());
            Ok(chunk
                .iter()
                .enumerate()
                .map(|(i, e)| ClExample {
                    visual_embs: Tensor::new(
                        vec![f, w],
                        out.visual_embs.data()[i * f * w..(i + 1) * f * w].to_vec(),
                    )
                    .expect("frame slice"),
                    audio_emb: out.audio_emb.row(i).to_vec(),
                    theme_pred: out.theme_probs.row(i).to_vec(),
                    theme: e.theme,
                    label: e.label,
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(examples.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

impl TiAvc {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            tl: TlModel::new(config, rng)?,
            cl: ClModel::new(config, rng)?,
            tl_trained: false,
        })
    }

    /// Assembles a pipeline from a TL model that has already been trained,
    /// for instance one loaded from a checkpoint.
    pub fn with_trained_tl(tl: TlModel<f32>, cl: ClModel<f32>) -> Self {
        Self {
            tl,
            cl,
            tl_trained: true,
        }
    }

    pub fn tl_trained(&self) -> bool {
        self.tl_trained
    }

    /// Stage 1: theme classification on the matched pairs of each split.
    pub fn train_tl(
        &mut self,
        train: &[Example],
        val: &[Example],
        config: &TrainConfig,
    ) -> Result<TrainingLog> {
        let positives =
            |set: &[Example]| -> Vec<Example> { set.iter().filter(|e| e.label).cloned().collect() };
        let log = fit(&mut self.tl, &positives(train), &positives(val), config)?;
        self.tl_trained = true;
        Ok(log)
    }

    /// Runs the frozen TL model over `examples`.
    pub fn extract(&self, examples: &[Example]) -> Result<Vec<ClExample>> {
        extract_features(&self.tl, examples)
    }

    /// Stage 2: trains the CL model on frozen TL outputs. TL parameters
    /// are only read.
    pub fn train_cl(
        &mut self,
        train: &[Example],
        val: &[Example],
        config: &TrainConfig,
    ) -> Result<TrainingLog> {
        if !self.tl_trained {
            return Err(Error::Config(
                "the CL stage needs a trained TL model; run stage 1 first".into(),
            ));
        }
        let train = self.extract(train)?;
        let val = self.extract(val)?;
        fit(&mut self.cl, &train, &val, config)
    }

    pub fn match_prob(&self, examples: &[Example]) -> Result<Vec<f64>> {
        let features = self.extract(examples)?;
        let themes = self.cl.themes();
        let chunks: Vec<Result<Vec<f64>>> = features
            .par_chunks(SCORE_CHUNK)
            .map(|chunk| {
                let refs: Vec<&ClExample> = chunk.iter().collect();
                let b = ClBatch::<f32>::new(&refs, themes)?;
                let (logits, _) =
                    self.cl
                        .forward(&b.audio_emb, &b.visual_embs, &b.theme_pred, &b.theme_true)?;
                Ok(logits.data().iter().map(|&z| sigmoid(z) as f64).collect())
            })
            .collect();
        let mut out = Vec::with_capacity(examples.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{examples, tiny_config};
    use crate::nn::Params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quick() -> TrainConfig {
        TrainConfig {
            max_epochs: 2,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn stage_two_requires_stage_one() {
        let config = tiny_config();
        let mut p = TiAvc::new(&config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ex = examples(&config, 8, 0);
        assert!(p.train_cl(&ex[..6], &ex[6..], &quick()).is_err());
    }

    #[test]
    fn stage_two_leaves_tl_untouched() {
        let config = tiny_config();
        let mut p = TiAvc::new(&config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let ex = examples(&config, 16, 1);
        p.train_tl(&ex[..12], &ex[12..], &quick()).unwrap();
        let frozen = p.tl.snapshot();
        let cl_before = p.cl.snapshot();
        p.train_cl(&ex[..12], &ex[12..], &quick()).unwrap();
        assert_eq!(p.tl.snapshot(), frozen);
        assert_ne!(p.cl.snapshot(), cl_before);
    }

    #[test]
    fn cl_sees_predicted_not_true_themes() {
        let config = tiny_config();
        let p = TiAvc::new(&config, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ex = examples(&config, 5, 2);
        let features = p.extract(&ex).unwrap();
        let refs: Vec<&Example> = ex.iter().collect();
        let probs = p.tl.predict(&Batch::new(&refs).unwrap()).unwrap();
        for (i, f) in features.iter().enumerate() {
            assert_eq!(f.theme_pred.as_slice(), probs.row(i));
            assert_eq!(f.theme, ex[i].theme);
        }
    }

    #[test]
    fn scores_are_probabilities_in_input_order() {
        let config = tiny_config();
        let p = TiAvc::new(&config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let ex = examples(&config, 130, 3);
        let all = p.match_prob(&ex).unwrap();
        let tail = p.match_prob(&ex[100..]).unwrap();
        assert_eq!(&all[100..], tail.as_slice());
        assert!(all.iter().all(|&s| s > 0.0 && s < 1.0));
    }
}
