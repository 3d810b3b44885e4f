use rand::Rng;

use super::blocks::{AudioCache, AudioEncoder, Fusion, FusionCache, VisualCache, VisualEncoder};
use super::config::ModelConfig;
use super::input::{Batch, Example};
use crate::error::{Error, Result};
use crate::nn::param::{visit_child, visit_child_mut};
use crate::nn::{
    concat_frames, softmax, softmax_cross_entropy, split_frames_grad, FramePart, Param, Params,
    Scalar, Tensor,
};
use crate::optim::Trainable;

/// Theme-learning model: audio and visual encoders fused into a theme
/// classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct TlModel<T> {
    pub audio: AudioEncoder<T>,
    pub visual: VisualEncoder<T>,
    pub fusion: Fusion<T>,
    frames: usize,
}

/// Everything the CL model consumes from a TL forward pass.
#[derive(Clone, Debug)]
pub struct TlOutput<T> {
    /// `[B, K]`
    pub logits: Tensor<T>,
    /// `[B, K]`, rows sum to one.
    pub theme_probs: Tensor<T>,
    /// `[B, W]`
    pub audio_emb: Tensor<T>,
    /// `[B, F, W]`
    pub visual_embs: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct TlCache<T> {
    audio: AudioCache<T>,
    visual: VisualCache<T>,
    fusion: FusionCache<T>,
    width: usize,
}

impl<T: Scalar> TlModel<T> {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let w = config.width;
        Ok(Self {
            audio: AudioEncoder::new("tl.audio", config.audio_dim, w, rng),
            visual: VisualEncoder::new("tl.visual", config.visual_dim, w, rng),
            fusion: Fusion::new(
                "tl.fusion",
                2 * w,
                config.fusion,
                config.themes,
                config.kernel,
                rng,
            )?,
            frames: config.frames,
        })
    }

    pub fn themes(&self) -> usize {
        self.fusion.output_dim()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn width(&self) -> usize {
        self.audio.width()
    }

    pub fn forward(&self, batch: &Batch<T>) -> Result<(TlOutput<T>, TlCache<T>)> {
        check_frames(&batch.visual, self.frames)?;
        let (audio_emb, audio) = self.audio.forward(&batch.audio_refs())?;
        let (visual_embs, visual) = self.visual.forward(&batch.visual)?;
        let fused = concat_frames(
            self.frames,
            &[
                FramePart::PerFrame(&visual_embs),
                FramePart::Repeated(&audio_emb),
            ],
        )?;
        let (logits, fusion) = self.fusion.forward(&fused)?;
        let theme_probs = softmax(&logits);
        Ok((
            TlOutput {
                logits,
                theme_probs,
                audio_emb,
                visual_embs,
            },
            TlCache {
                audio,
                visual,
                fusion,
                width: self.width(),
            },
        ))
    }

    /// Backward from the theme logits plus optional gradients arriving
    /// directly at the two embeddings (used when a CL head sits on top).
    pub fn backward(
        &mut self,
        cache: &TlCache<T>,
        d_logits: &Tensor<T>,
        d_audio_emb: Option<&Tensor<T>>,
        d_visual_embs: Option<&Tensor<T>>,
    ) {
        let d_fused = self.fusion.backward(&cache.fusion, d_logits);
        let mut parts = split_frames_grad(&d_fused, &[(cache.width, false), (cache.width, true)]);
        let mut d_audio = parts.pop().expect("two parts");
        let mut d_visual = parts.pop().expect("two parts");
        if let Some(g) = d_audio_emb {
            d_audio.add_assign(g);
        }
        if let Some(g) = d_visual_embs {
            d_visual.add_assign(g);
        }
        self.audio.backward(&cache.audio, &d_audio);
        self.visual.backward(&cache.visual, &d_visual);
    }

    /// Theme probabilities for `batch`.
    pub fn predict(&self, batch: &Batch<T>) -> Result<Tensor<T>> {
        Ok(self.forward(batch)?.0.theme_probs)
    }

    pub fn cast<U: Scalar>(&self) -> TlModel<U> {
        TlModel {
            audio: self.audio.cast(),
            visual: self.visual.cast(),
            fusion: self.fusion.cast(),
            frames: self.frames,
        }
    }
}

pub(crate) fn check_frames<T: Scalar>(visual: &Tensor<T>, frames: usize) -> Result<()> {
    if visual.rank() != 3 || visual.dim(1) != frames {
        return Err(Error::dim(
            "visual frames",
            format!("expected {frames} frames, got shape {:?}", visual.shape()),
        ));
    }
    Ok(())
}

impl<T: Scalar> Params<T> for TlModel<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        visit_child("audio", &self.audio, f);
        visit_child("visual", &self.visual, f);
        visit_child("fusion", &self.fusion, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        visit_child_mut("audio", &mut self.audio, f);
        visit_child_mut("visual", &mut self.visual, f);
        visit_child_mut("fusion", &mut self.fusion, f);
    }
}

/// Trained on matched examples: cross-entropy against the visual theme.
impl<T: Scalar> Trainable<T> for TlModel<T> {
    type Sample = Example;

    fn accumulate_gradients(&mut self, batch: &[&Example]) -> Result<f64> {
        let batch = Batch::new(batch)?;
        let targets = batch.theme_one_hot(self.themes())?;
        let (out, cache) = self.forward(&batch)?;
        let loss = softmax_cross_entropy(&out.logits, &targets, None, batch.len())?;
        self.backward(&cache, &loss.grad, None, None);
        Ok(loss.loss)
    }

    fn loss(&self, batch: &[&Example]) -> Result<f64> {
        let batch = Batch::new(batch)?;
        let targets = batch.theme_one_hot(self.themes())?;
        let (out, _) = self.forward(&batch)?;
        Ok(softmax_cross_entropy(&out.logits, &targets, None, batch.len())?.loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{examples, tiny_config};
    use crate::nn::{grad_check, GradCheckOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_widths() {
        let config = ModelConfig::full(19, 8, 128, 1280);
        let model = TlModel::<f32>::new(&config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ex = examples(&config, 2, 0);
        let refs: Vec<&Example> = ex.iter().collect();
        let (out, _) = model.forward(&Batch::new(&refs).unwrap()).unwrap();
        assert_eq!(out.audio_emb.shape(), &[2, 128]);
        assert_eq!(out.visual_embs.shape(), &[2, 8, 128]);
        assert_eq!(out.theme_probs.shape(), &[2, 19]);
        for r in 0..2 {
            let s: f32 = out.theme_probs.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_head_gives_uniform_themes() {
        let config = tiny_config();
        let mut model = TlModel::<f64>::new(&config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        model.fusion.head.weight.value.fill(0.0);
        let ex = examples(&config, 3, 1);
        let refs: Vec<&Example> = ex.iter().collect();
        let probs = model.predict(&Batch::new(&refs).unwrap()).unwrap();
        let k = config.themes as f64;
        assert!(probs.data().iter().all(|&p| (p - 1.0 / k).abs() < 1e-12));
    }

    #[test]
    fn frame_permutation_invariance_with_pointwise_kernel() {
        let config = tiny_config();
        let model = TlModel::<f64>::new(&config, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ex = examples(&config, 2, 2);
        let refs: Vec<&Example> = ex.iter().collect();
        let batch = Batch::new(&refs).unwrap();
        let mut permuted = batch.clone();
        let (f, d) = (config.frames, config.visual_dim);
        let order: Vec<usize> = (0..f).rev().collect();
        for b in 0..2 {
            for (dst, &src) in order.iter().enumerate() {
                let s = (b * f + src) * d;
                let row = batch.visual.data()[s..s + d].to_vec();
                let o = (b * f + dst) * d;
                permuted.visual.data_mut()[o..o + d].copy_from_slice(&row);
            }
        }
        let a = model.predict(&batch).unwrap();
        let p = model.predict(&permuted).unwrap();
        for (x, y) in a.data().iter().zip(p.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_frame_count_is_rejected() {
        let config = tiny_config();
        let model = TlModel::<f64>::new(&config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut other = config.clone();
        other.frames += 1;
        let ex = examples(&other, 1, 3);
        let refs: Vec<&Example> = ex.iter().collect();
        assert!(model.forward(&Batch::new(&refs).unwrap()).is_err());
    }

    #[test]
    fn uniform_prediction_costs_ln_k() {
        let config = tiny_config();
        let mut model = TlModel::<f64>::new(&config, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        model.fusion.head.weight.value.fill(0.0);
        let ex = examples(&config, 4, 4);
        let refs: Vec<&Example> = ex.iter().collect();
        let loss = model.loss(&refs).unwrap();
        assert!((loss - (config.themes as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn full_model_gradients() {
        let config = tiny_config();
        let mut model = TlModel::<f64>::new(&config, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let ex = examples(&config, 3, 5);
        let refs: Vec<&Example> = ex.iter().collect();
        let report = grad_check(
            &mut model,
            |m| m.accumulate_gradients(&refs),
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }
}
