use rand::Rng;

use super::blocks::{AudioCache, AudioEncoder, Fusion, FusionCache, VisualCache, VisualEncoder};
use super::config::ModelConfig;
use super::input::{Batch, Example};
use super::tl::check_frames;
use crate::error::{Error, Result};
use crate::nn::param::{visit_child, visit_child_mut};
use crate::nn::{
    binary_cross_entropy_with_logits, concat_frames, sigmoid, split_frames_grad, FramePart, Param,
    Params, Scalar, Tensor,
};
use crate::optim::Trainable;

/// TL-shaped correspondence classifier with a sigmoid head.
///
/// Baseline-2 additionally receives the visual side's true theme as K
/// channels repeated over frames.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineModel<T> {
    pub audio: AudioEncoder<T>,
    pub visual: VisualEncoder<T>,
    pub fusion: Fusion<T>,
    frames: usize,
    themes: usize,
    with_theme: bool,
}

#[derive(Clone, Debug)]
pub struct BaselineCache<T> {
    audio: AudioCache<T>,
    visual: VisualCache<T>,
    fusion: FusionCache<T>,
}

impl<T: Scalar> BaselineModel<T> {
    /// `variant` 1 or 2.
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, variant: u8, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let with_theme = match variant {
            1 => false,
            2 => true,
            v => {
                return Err(Error::Config(format!(
                    "baseline variant must be 1 or 2, got {v}"
                )))
            }
        };
        let w = config.width;
        let prefix = if with_theme { "baseline2" } else { "baseline1" };
        Ok(Self {
            audio: AudioEncoder::new(&format!("{prefix}.audio"), config.audio_dim, w, rng),
            visual: VisualEncoder::new(&format!("{prefix}.visual"), config.visual_dim, w, rng),
            fusion: Fusion::new(
                &format!("{prefix}.fusion"),
                config.baseline_input(with_theme),
                config.baseline_fusion(),
                1,
                config.kernel,
                rng,
            )?,
            frames: config.frames,
            themes: config.themes,
            with_theme,
        })
    }

    pub fn variant(&self) -> u8 {
        if self.with_theme {
            2
        } else {
            1
        }
    }

    /// Match logits `[B, 1]`.
    pub fn forward(&self, batch: &Batch<T>) -> Result<(Tensor<T>, BaselineCache<T>)> {
        let theme = if self.with_theme {
            Some(batch.theme_one_hot(self.themes)?)
        } else {
            None
        };
        self.forward_with_theme(batch, theme)
    }

    /// As [`forward`](Self::forward), with the `[B, K]` theme channels
    /// supplied by the caller. Ignored by baseline-1.
    pub fn forward_with_theme(
        &self,
        batch: &Batch<T>,
        theme: Option<Tensor<T>>,
    ) -> Result<(Tensor<T>, BaselineCache<T>)> {
        check_frames(&batch.visual, self.frames)?;
        let (audio_emb, audio) = self.audio.forward(&batch.audio_refs())?;
        let (visual_embs, visual) = self.visual.forward(&batch.visual)?;
        let theme = if self.with_theme {
            let t = theme.ok_or_else(|| Error::dim("baseline2", "missing theme input"))?;
            t.expect_shape("baseline2.theme", &[Some(batch.len()), Some(self.themes)])?;
            Some(t)
        } else {
            None
        };
        let mut parts = vec![
            FramePart::PerFrame(&visual_embs),
            FramePart::Repeated(&audio_emb),
        ];
        if let Some(t) = &theme {
            parts.push(FramePart::Repeated(t));
        }
        let fused = concat_frames(self.frames, &parts)?;
        let (logits, fusion) = self.fusion.forward(&fused)?;
        Ok((
            logits,
            BaselineCache {
                audio,
                visual,
                fusion,
            },
        ))
    }

    pub fn backward(&mut self, cache: &BaselineCache<T>, d_logits: &Tensor<T>) {
        let w = self.audio.width();
        let d_fused = self.fusion.backward(&cache.fusion, d_logits);
        let mut layout = vec![(w, false), (w, true)];
        if self.with_theme {
            layout.push((self.themes, true));
        }
        let parts = split_frames_grad(&d_fused, &layout);
        self.audio.backward(&cache.audio, &parts[1]);
        self.visual.backward(&cache.visual, &parts[0]);
    }

    pub fn match_prob(&self, batch: &Batch<T>) -> Result<Vec<T>> {
        let (logits, _) = self.forward(batch)?;
        Ok(logits.data().iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn cast<U: Scalar>(&self) -> BaselineModel<U> {
        BaselineModel {
            audio: self.audio.cast(),
            visual: self.visual.cast(),
            fusion: self.fusion.cast(),
            frames: self.frames,
            themes: self.themes,
            with_theme: self.with_theme,
        }
    }
}

impl<T: Scalar> Params<T> for BaselineModel<T> {
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

impl<T: Scalar> Trainable<T> for BaselineModel<T> {
    type Sample = Example;

    fn accumulate_gradients(&mut self, batch: &[&Example]) -> Result<f64> {
        let b = Batch::new(batch)?;
        let (logits, cache) = self.forward(&b)?;
        let loss = binary_cross_entropy_with_logits(&logits, &b.labels, T::one(), b.len())?;
        self.backward(&cache, &loss.grad);
        Ok(loss.loss)
    }

    fn loss(&self, batch: &[&Example]) -> Result<f64> {
        let b = Batch::new(batch)?;
        let (logits, _) = self.forward(&b)?;
        Ok(binary_cross_entropy_with_logits(&logits, &b.labels, T::one(), b.len())?.loss)
    }
}
