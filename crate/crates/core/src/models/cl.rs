use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{Fusion, FusionCache};
use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::param::{visit_child, visit_child_mut};
use crate::nn::{
    binary_cross_entropy_with_logits, concat_frames, sigmoid, split_frames_grad, FramePart, Param,
    Params, Scalar, Tensor,
};
use crate::optim::Trainable;

use super::input::one_hot;

/// The four input groups of the CL model, in channel order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputGroup {
    Vision,
    Audio,
    PredictedThemes,
    TrueThemes,
}

impl InputGroup {
    pub const ALL: [InputGroup; 4] = [
        InputGroup::Vision,
        InputGroup::Audio,
        InputGroup::PredictedThemes,
        InputGroup::TrueThemes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputGroup::Vision => "vision",
            InputGroup::Audio => "audio",
            InputGroup::PredictedThemes => "predicted_themes",
            InputGroup::TrueThemes => "true_themes",
        }
    }
}

/// Channel ranges of the CL input groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupLayout {
    pub ranges: [(InputGroup, Range<usize>); 4],
}

impl GroupLayout {
    pub fn new(width: usize, themes: usize) -> Self {
        let (w, k) = (width, themes);
        Self {
            ranges: [
                (InputGroup::Vision, 0..w),
                (InputGroup::Audio, w..2 * w),
                (InputGroup::PredictedThemes, 2 * w..2 * w + k),
                (InputGroup::TrueThemes, 2 * w + k..2 * w + 2 * k),
            ],
        }
    }

    pub fn channels(&self) -> usize {
        self.ranges[3].1.end
    }

    pub fn range(&self, group: InputGroup) -> Range<usize> {
        self.ranges
            .iter()
            .find(|(g, _)| *g == group)
            .map(|(_, r)| r.clone())
            .expect("every group has a range")
    }
}

/// Correspondence-learning model over
/// `[visual_f | audio | theme_pred | theme_true]` per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ClModel<T> {
    pub fusion: Fusion<T>,
    width: usize,
    themes: usize,
}

#[derive(Clone, Debug)]
pub struct ClCache<T> {
    fusion: FusionCache<T>,
}

/// Gradients with respect to the CL inputs that come from upstream models.
#[derive(Clone, Debug)]
pub struct ClInputGrad<T> {
    pub visual_embs: Tensor<T>,
    pub audio_emb: Tensor<T>,
    pub theme_pred: Tensor<T>,
}

const THEME_SUM_TOLERANCE: f64 = 1e-3;

impl<T: Scalar> ClModel<T> {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            fusion: Fusion::new(
                "cl",
                config.cl_input(),
                config.fusion,
                1,
                config.kernel,
                rng,
            )?,
            width: config.width,
            themes: config.themes,
        })
    }

    pub fn layout(&self) -> GroupLayout {
        GroupLayout::new(self.width, self.themes)
    }

    pub fn themes(&self) -> usize {
        self.themes
    }

    /// Builds the `[B, F, 2W + 2K]` first-layer input.
    pub fn input(
        &self,
        audio_emb: &Tensor<T>,
        visual_embs: &Tensor<T>,
        theme_pred: &Tensor<T>,
        theme_true: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let k = self.themes;
        audio_emb.expect_shape("cl.audio", &[None, Some(self.width)])?;
        visual_embs.expect_shape("cl.visual", &[None, None, Some(self.width)])?;
        theme_pred.expect_shape("cl.theme_pred", &[None, Some(k)])?;
        theme_true.expect_shape("cl.theme_true", &[None, Some(k)])?;
        for r in 0..theme_pred.dim(0) {
            let sum: f64 = theme_pred.row(r).iter().map(|v| v.to_f64_lossy()).sum();
            if (sum - 1.0).abs() > THEME_SUM_TOLERANCE {
                return Err(Error::InvalidTarget(format!(
                    "theme prediction row {r} sums to {sum}, expected a distribution"
                )));
            }
        }
        concat_frames(
            visual_embs.dim(1),
            &[
                FramePart::PerFrame(visual_embs),
                FramePart::Repeated(audio_emb),
                FramePart::Repeated(theme_pred),
                FramePart::Repeated(theme_true),
            ],
        )
    }

    /// Match logits `[B, 1]`.
    pub fn forward(
        &self,
        audio_emb: &Tensor<T>,
        visual_embs: &Tensor<T>,
        theme_pred: &Tensor<T>,
        theme_true: &Tensor<T>,
    ) -> Result<(Tensor<T>, ClCache<T>)> {
        let x = self.input(audio_emb, visual_embs, theme_pred, theme_true)?;
        let (logits, fusion) = self.fusion.forward(&x)?;
        Ok((logits, ClCache { fusion }))
    }

    /// Match probabilities in (0, 1).
    pub fn match_prob(
        &self,
        audio_emb: &Tensor<T>,
        visual_embs: &Tensor<T>,
        theme_pred: &Tensor<T>,
        theme_true: &Tensor<T>,
    ) -> Result<Vec<T>> {
        let (logits, _) = self.forward(audio_emb, visual_embs, theme_pred, theme_true)?;
        Ok(logits.data().iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn backward(&mut self, cache: &ClCache<T>, d_logits: &Tensor<T>) -> ClInputGrad<T> {
        let (w, k) = (self.width, self.themes);
        let dx = self.fusion.backward(&cache.fusion, d_logits);
        let mut parts = split_frames_grad(&dx, &[(w, false), (w, true), (k, true), (k, true)]);
        parts.pop();
        let theme_pred = parts.pop().expect("four parts");
        let audio_emb = parts.pop().expect("four parts");
        let visual_embs = parts.pop().expect("four parts");
        ClInputGrad {
            visual_embs,
            audio_emb,
            theme_pred,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ClModel<U> {
        ClModel {
            fusion: self.fusion.cast(),
            width: self.width,
            themes: self.themes,
        }
    }
}

impl<T: Scalar> Params<T> for ClModel<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        visit_child("fusion", &self.fusion, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        visit_child_mut("fusion", &mut self.fusion, f);
    }
}

/// A pair after it has passed through a frozen TL model.
#[derive(Clone, Debug, PartialEq)]
pub struct ClExample {
    /// `[F, W]`
    pub visual_embs: Tensor<f32>,
    /// `[W]`
    pub audio_emb: Vec<f32>,
    /// `[K]` softmax output of the TL model.
    pub theme_pred: Vec<f32>,
    pub theme: usize,
    pub label: bool,
}

/// Stacked CL inputs.
#[derive(Clone, Debug)]
pub struct ClBatch<T> {
    pub audio_emb: Tensor<T>,
    pub visual_embs: Tensor<T>,
    pub theme_pred: Tensor<T>,
    pub theme_true: Tensor<T>,
    pub labels: Vec<T>,
}

impl<T: Scalar> ClBatch<T> {
    pub fn new(examples: &[&ClExample], themes: usize) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::Dataset("empty batch".into()))?;
        let (b, w, k) = (
            examples.len(),
            first.audio_emb.len(),
            first.theme_pred.len(),
        );
        if examples
            .iter()
            .any(|e| e.audio_emb.len() != w || e.theme_pred.len() != k)
        {
            return Err(Error::dim("cl batch", "examples differ in width"));
        }
        let frames: Vec<&Tensor<f32>> = examples.iter().map(|e| &e.visual_embs).collect();
        let flat = |f: &dyn Fn(&ClExample) -> &[f32]| -> Vec<T> {
            examples
                .iter()
                .flat_map(|e| f(e).iter().map(|&v| T::from_f64_lossy(v as f64)))
                .collect()
        };
        let themes_true: Vec<usize> = examples.iter().map(|e| e.theme).collect();
        Ok(Self {
            audio_emb: Tensor::new(vec![b, w], flat(&|e| &e.audio_emb))?,
            visual_embs: Tensor::stack(&frames)?.cast(),
            theme_pred: Tensor::new(vec![b, k], flat(&|e| &e.theme_pred))?,
            theme_true: one_hot(&themes_true, themes)?,
            labels: examples
                .iter()
                .map(|e| if e.label { T::one() } else { T::zero() })
                .collect(),
        })
    }
}

impl<T: Scalar> Trainable<T> for ClModel<T> {
    type Sample = ClExample;

    fn accumulate_gradients(&mut self, batch: &[&ClExample]) -> Result<f64> {
        let b = ClBatch::<T>::new(batch, self.themes)?;
        let (logits, cache) =
            self.forward(&b.audio_emb, &b.visual_embs, &b.theme_pred, &b.theme_true)?;
        let loss = binary_cross_entropy_with_logits(&logits, &b.labels, T::one(), batch.len())?;
        self.backward(&cache, &loss.grad);
        Ok(loss.loss)
    }

    fn loss(&self, batch: &[&ClExample]) -> Result<f64> {
        let b = ClBatch::<T>::new(batch, self.themes)?;
        let (logits, _) =
            self.forward(&b.audio_emb, &b.visual_embs, &b.theme_pred, &b.theme_true)?;
        Ok(binary_cross_entropy_with_logits(&logits, &b.labels, T::one(), batch.len())?.loss)
    }
}
