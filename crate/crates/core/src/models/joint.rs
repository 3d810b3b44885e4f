use rand::Rng;

use super::cl::{ClCache, ClModel};
use super::config::ModelConfig;
use super::input::{Batch, Example};
use super::tl::{TlCache, TlModel, TlOutput};
use crate::error::{Error, Result};
use crate::nn::param::{visit_child, visit_child_mut};
use crate::nn::{
    binary_cross_entropy_with_logits, sigmoid, softmax_backward, softmax_cross_entropy, Param,
    Params, Scalar, Tensor,
};
use crate::optim::Trainable;

/// TL trunk and CL head trained together.
///
/// The CL head reads the live embeddings and the softmax theme prediction,
/// so the match loss also shapes the trunk. The theme loss is taken on
/// matched pairs only.
#[derive(Clone, Debug, PartialEq)]
pub struct JointModel<T> {
    pub tl: TlModel<T>,
    pub cl: ClModel<T>,
    /// Weight of the match loss.
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct JointCache<T> {
    tl: TlCache<T>,
    cl: ClCache<T>,
}

/// Outputs and loss terms of one joint forward pass.
#[derive(Clone, Debug)]
pub struct JointOutput<T> {
    pub tl: TlOutput<T>,
    /// `[B, 1]`
    pub match_logits: Tensor<T>,
}

impl<T: Scalar> JointModel<T> {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, lambda: f64, rng: &mut R) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!(
                "joint lambda must be non-negative, got {lambda}"
            )));
        }
        Ok(Self {
            tl: TlModel::new(config, rng)?,
            cl: ClModel::new(config, rng)?,
            lambda,
        })
    }

    pub fn forward(&self, batch: &Batch<T>) -> Result<(JointOutput<T>, JointCache<T>)> {
        let (tl_out, tl) = self.tl.forward(batch)?;
        let truth = batch.theme_one_hot(self.tl.themes())?;
        let (match_logits, cl) = self.cl.forward(
            &tl_out.audio_emb,
            &tl_out.visual_embs,
            &tl_out.theme_probs,
            &truth,
        )?;
        Ok((
            JointOutput {
                tl: tl_out,
                match_logits,
            },
            JointCache { tl, cl },
        ))
    }

    /// Returns `(theme loss, weighted match loss)` and their gradients with
    /// respect to the theme logits and match logits.
    fn losses(
        &self,
        batch: &Batch<T>,
        out: &JointOutput<T>,
    ) -> Result<(f64, f64, Tensor<T>, Tensor<T>)> {
        let n = batch.len();
        let targets = batch.theme_one_hot(self.tl.themes())?;
        let theme = softmax_cross_entropy(&out.tl.logits, &targets, Some(&batch.labels), n)?;
        let lambda = T::from_f64_lossy(self.lambda);
        let matched =
            binary_cross_entropy_with_logits(&out.match_logits, &batch.labels, lambda, n)?;
        Ok((theme.loss, matched.loss, theme.grad, matched.grad))
    }

    pub fn match_prob(&self, batch: &Batch<T>) -> Result<Vec<T>> {
        let (out, _) = self.forward(batch)?;
        Ok(out
            .match_logits
            .data()
            .iter()
            .map(|&z| sigmoid(z))
            .collect())
    }

    pub fn cast<U: Scalar>(&self) -> JointModel<U> {
        JointModel {
            tl: self.tl.cast(),
            cl: self.cl.cast(),
            lambda: self.lambda,
        }
    }
}

impl<T: Scalar> Params<T> for JointModel<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        visit_child("tl", &self.tl, f);
        visit_child("cl", &self.cl, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        visit_child_mut("tl", &mut self.tl, f);
        visit_child_mut("cl", &mut self.cl, f);
    }
}

impl<T: Scalar> Trainable<T> for JointModel<T> {
    type Sample = Example;

    fn accumulate_gradients(&mut self, batch: &[&Example]) -> Result<f64> {
        let batch = Batch::new(batch)?;
        let (out, cache) = self.forward(&batch)?;
        let (theme_loss, match_loss, mut d_theme_logits, d_match) = self.losses(&batch, &out)?;
        let d_inputs = self.cl.backward(&cache.cl, &d_match);
        let through_softmax = softmax_backward(&out.tl.theme_probs, &d_inputs.theme_pred);
        d_theme_logits.add_assign(&through_softmax);
        self.tl.backward(
            &cache.tl,
            &d_theme_logits,
            Some(&d_inputs.audio_emb),
            Some(&d_inputs.visual_embs),
        );
        Ok(theme_loss + match_loss)
    }

    fn loss(&self, batch: &[&Example]) -> Result<f64> {
        let batch = Batch::new(batch)?;
        let (out, _) = self.forward(&batch)?;
        let (theme_loss, match_loss, _, _) = self.losses(&batch, &out)?;
        Ok(theme_loss + match_loss)
    }
}
