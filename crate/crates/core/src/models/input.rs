use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// One audio-visual pair as the models see it.
///
/// Embeddings are shared with the dataset through `Arc`, so building the
/// two pairs of every record costs no copies.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// `[F, D_v]` frame embeddings of the visual-side record.
    pub visual: Arc<Tensor<f32>>,
    /// `[T_a, D_a]` audio embedding sequence.
    pub audio: Arc<Tensor<f32>>,
    /// Theme of the visual-side record.
    pub theme: usize,
    pub label: bool,
}

/// A stacked mini-batch of [`Example`]s.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub audio: Vec<Tensor<T>>,
    /// `[B, F, D_v]`
    pub visual: Tensor<T>,
    pub themes: Vec<usize>,
    pub labels: Vec<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(examples: &[&Example]) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Dataset("empty batch".into()));
        }
        let frames: Vec<&Tensor<f32>> = examples.iter().map(|e| e.visual.as_ref()).collect();
        Ok(Self {
            audio: examples.iter().map(|e| e.audio.cast()).collect(),
            visual: Tensor::stack(&frames)?.cast(),
            themes: examples.iter().map(|e| e.theme).collect(),
            labels: examples
                .iter()
                .map(|e| if e.label { T::one() } else { T::zero() })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.themes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.themes.is_empty()
    }

    pub fn audio_refs(&self) -> Vec<&Tensor<T>> {
        self.audio.iter().collect()
    }

    /// `[B, K]` one-hot rows of the visual-side themes.
    pub fn theme_one_hot(&self, themes: usize) -> Result<Tensor<T>> {
        one_hot(&self.themes, themes)
    }
}

pub fn one_hot<T: Scalar>(labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    if let Some(&bad) = labels.iter().find(|&&t| t >= classes) {
        return Err(Error::InvalidTarget(format!(
            "theme {bad} out of range for {classes} themes"
        )));
    }
    Ok(Tensor::from_fn(&[labels.len(), classes], |i| {
        if labels[i / classes] == i % classes {
            T::one()
        } else {
            T::zero()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_rows_and_bounds() {
        let t: Tensor<f64> = one_hot(&[2, 0], 3).unwrap();
        assert_eq!(t.data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(one_hot::<f64>(&[3], 3).is_err());
    }

    #[test]
    fn batch_stacks_frames() {
        let e = Example {
            visual: Arc::new(Tensor::from_fn(&[2, 3], |i| i as f32)),
            audio: Arc::new(Tensor::zeros(&[4, 2])),
            theme: 1,
            label: true,
        };
        let b = Batch::<f64>::new(&[&e, &e]).unwrap();
        assert_eq!(b.visual.shape(), &[2, 2, 3]);
        assert_eq!(b.labels, vec![1.0, 1.0]);
        assert!(Batch::<f32>::new(&[]).is_err());
    }
}
